use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rm4d::ablation::{ablate_joint_limits, AblationSettings};
use rm4d::capability::CAPM_MAGIC;
use rm4d::construction::write_metrics_csv;
use rm4d::grid::RM4D_MAGIC;
use rm4d::placement::{read_grasps_csv, synthesize_grasps, write_grasps_csv};
use rm4d::pose::rotation_from_rpy;
use rm4d::*;

use crate::config::{EvalConfig, ExperimentConfig};
use crate::{AblateArgs, BuildArgs, CliError, EvalArgs, InvertArgs, PlaceArgs, QueryArgs, SynthArgs};

enum AnyMap {
    Rm4d(ReachGrid4D),
    Capability(CapabilityGrid),
}

impl AnyMap {
    fn new(kind: MapKind, robot: &str, params: GridParams) -> Result<Self, CliError> {
        Ok(match kind {
            MapKind::Rm4d => AnyMap::Rm4d(ReachGrid4D::new(robot, params)?),
            MapKind::Zacharias5d => AnyMap::Capability(CapabilityGrid::zacharias_5d(robot, params)?),
            MapKind::Zacharias6d => AnyMap::Capability(CapabilityGrid::zacharias_6d(robot, params)?),
        })
    }

    fn load(path: &Path) -> Result<Self, CliError> {
        let mut file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let mut magic = [0u8; 4];
        file.read_exact(&mut magic)
            .map_err(|_| CliError::Data(format!("{}: not a map file", path.display())))?;
        let with_path = |e: rm4d::Error| CliError::Data(format!("{}: {e}", path.display()));
        if &magic == RM4D_MAGIC {
            ReachGrid4D::load_from_path(path).map(AnyMap::Rm4d).map_err(with_path)
        } else if &magic == CAPM_MAGIC {
            CapabilityGrid::load_from_path(path)
                .map(AnyMap::Capability)
                .map_err(with_path)
        } else {
            Err(CliError::Data(format!("{}: not a map file", path.display())))
        }
    }

    fn save(&self, path: &Path) -> Result<(), CliError> {
        match self {
            AnyMap::Rm4d(m) => m.save_to_path(path)?,
            AnyMap::Capability(m) => m.save_to_path(path)?,
        }
        Ok(())
    }

    fn params(&self) -> &GridParams {
        match self {
            AnyMap::Rm4d(m) => m.params(),
            AnyMap::Capability(m) => m.params(),
        }
    }

    fn as_dyn(&self) -> &dyn ReachabilityMap {
        match self {
            AnyMap::Rm4d(m) => m,
            AnyMap::Capability(m) => m,
        }
    }

    fn into_rm4d(self, path: &Path) -> Result<ReachGrid4D, CliError> {
        match self {
            AnyMap::Rm4d(m) => Ok(m),
            AnyMap::Capability(m) => Err(CliError::Data(format!(
                "{}: inverse queries need an rm4d map, this is {}",
                path.display(),
                m.kind()
            ))),
        }
    }
}

fn parse_pose(text: &str) -> Result<TcpPose, CliError> {
    let values = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|_| CliError::Usage(format!("pose `{text}`: expected comma-separated numbers")))?;
    match values.len() {
        12 => TcpPose::from_row_major12(&values).map_err(|e| CliError::Usage(format!("pose `{text}`: {e}"))),
        6 => {
            let r = rotation_from_rpy(values[3].to_radians(), values[4].to_radians(), values[5].to_radians());
            Ok(TcpPose::from_parts(r, Vector3::new(values[0], values[1], values[2])))
        }
        n => Err(CliError::Usage(format!(
            "pose `{text}`: expected 12 values (rotation row-major + position) or 6 (x,y,z,roll,pitch,yaw), got {n}"
        ))),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn pct(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        100.0 * a as f64 / b as f64
    }
}

fn rate(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |x| format!("{x:.4}"))
}

pub fn build(a: BuildArgs) -> Result<(), CliError> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = a.robot {
        cfg.robot = v;
    }
    if let Some(v) = a.map_type {
        cfg.map_type = v;
    }
    if let Some(v) = a.samples {
        cfg.schedule.total_samples = v;
    }
    if let Some(v) = a.checkpoint_every {
        cfg.schedule.checkpoint_every = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.cell_size {
        cfg.grid.cell_size = v;
    }
    if let Some(v) = a.delta_theta_deg {
        cfg.grid.delta_theta_deg = v;
    }
    if a.r_xy.is_some() {
        cfg.grid.r_xy = a.r_xy;
    }
    if a.r_z.is_some() {
        cfg.grid.r_z = a.r_z;
    }
    if a.eval_count.is_some() || a.eval_seed.is_some() {
        let base = cfg.eval.clone().unwrap_or_default();
        cfg.eval = Some(EvalConfig {
            count: a.eval_count.unwrap_or(base.count),
            seed: a.eval_seed.unwrap_or(base.seed),
        });
    }
    if let Some(v) = a.out_dir {
        cfg.out_dir = v;
    }

    let kind = cfg.map_kind()?;
    let model = robots::load(&cfg.robot)?;
    let params = cfg.grid_params(&model)?;
    let schedule = ConstructionSchedule::new(cfg.schedule.total_samples, cfg.schedule.checkpoint_every, cfg.seed)?;
    std::fs::create_dir_all(&cfg.out_dir)?;

    let stem = format!("{}-{kind}", model.name());
    let map_path = cfg.out_dir.join(format!("{stem}.map"));
    let metrics_path = cfg.out_dir.join(format!("{stem}-metrics.csv"));

    let labels = match &cfg.eval {
        Some(e) => {
            let path = cfg
                .out_dir
                .join(format!("labels-{}-{}-{}.csv", model.name(), e.count, e.seed));
            Some(EvalPoseSet::load_or_generate(
                path,
                &model,
                e.count,
                e.seed,
                &IkConfig::default(),
            )?)
        }
        None => None,
    };

    let map = if a.resume && map_path.exists() {
        let map = AnyMap::load(&map_path)?;
        if map.as_dyn().kind() != kind || map.params() != &params {
            return Err(CliError::Data(format!(
                "{}: existing map does not match the requested type and grid",
                map_path.display()
            )));
        }
        map
    } else {
        AnyMap::new(kind, model.name(), params)?
    };

    let report = build_map(
        &model,
        map.as_dyn(),
        &schedule,
        &BuildOptions {
            eval: labels.as_ref(),
            retain: 0,
        },
    )?;
    map.save(&map_path)?;
    let mut out = create(&metrics_path)?;
    write_metrics_csv(&mut out, &report.metrics[0], kind.as_str(), model.name(), cfg.seed)?;
    out.flush()?;
    let mut out = create(&cfg.out_dir.join(format!("{stem}-config.json")))?;
    serde_json::to_writer_pretty(&mut out, &cfg).map_err(|e| CliError::Internal(e.to_string()))?;
    out.flush()?;

    let m = map.as_dyn();
    println!("config   {}", cfg.hash());
    println!("map      {} ({kind}, {} cells)", map_path.display(), m.cell_count());
    println!(
        "marked   {} cells ({:.2}%)",
        m.marked_count(),
        pct(m.marked_count(), m.cell_count())
    );
    println!(
        "samples  {} valid in map, {} added from {} draws",
        m.sample_count(),
        report.samples_added,
        report.draws
    );
    if let Some(last) = report.metrics[0].last().filter(|r| r.accuracy.is_some()) {
        println!(
            "eval     accuracy {} TPR {} FPR {}",
            rate(last.accuracy),
            rate(last.tpr),
            rate(last.fpr)
        );
    }
    println!("elapsed  {:.2?}", report.elapsed);
    println!("metrics  {}", metrics_path.display());
    Ok(())
}

pub fn query(a: QueryArgs) -> Result<(), CliError> {
    let pose = parse_pose(&a.pose)?;
    let map = AnyMap::load(&a.map)?;
    let reachable = map.as_dyn().query(&pose);
    let in_range = match &map {
        AnyMap::Rm4d(m) => m.index_of(&pose).is_some(),
        AnyMap::Capability(m) => m.index_of(&pose).is_some(),
    };
    match (reachable, in_range) {
        (true, _) => println!("reachable"),
        (false, true) => println!("unreachable"),
        (false, false) => println!("unreachable (outside the map)"),
    }
    Ok(())
}

pub fn invert(a: InvertArgs) -> Result<(), CliError> {
    let pose = parse_pose(&a.pose)?;
    let map = AnyMap::load(&a.map)?.into_rm4d(&a.map)?;
    let set = map.query_inverse(&pose);
    let mut out = create(&a.out)?;
    writeln!(out, "x,y")?;
    for (x, y) in &set.positions {
        writeln!(out, "{x},{y}")?;
    }
    out.flush()?;
    if set.out_of_range {
        println!("0 base positions: pose height or tilt is outside the map");
    } else {
        println!("{} base positions -> {}", set.positions.len(), a.out.display());
    }
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    let map = AnyMap::load(&a.map)?;
    let m = map.as_dyn();
    let robot = a.robot.unwrap_or_else(|| m.robot_name().to_string());
    let model = robots::load(&robot)?;
    if model.name() != m.robot_name() {
        return Err(CliError::Data(format!(
            "map was built for `{}`, not `{}`",
            m.robot_name(),
            model.name()
        )));
    }
    let labels_path = a.labels.unwrap_or_else(|| {
        let stem = a
            .map
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        a.map
            .with_file_name(format!("{stem}-labels-{}-{}.csv", a.eval_count, a.eval_seed))
    });
    let t = Instant::now();
    let labels = EvalPoseSet::load_or_generate(&labels_path, &model, a.eval_count, a.eval_seed, &IkConfig::default())?;
    let label_time = t.elapsed();
    let r = evaluate(m, &labels)?;

    let mut out = create(&a.out)?;
    writeln!(
        out,
        "samples,marked_cells,accuracy,tpr,fpr,tp,tn,fp,fn,map_type,robot,seed"
    )?;
    let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| x.to_string());
    let c = r.confusion;
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        m.sample_count(),
        m.marked_count(),
        r.accuracy,
        opt(r.tpr),
        opt(r.fpr),
        c.tp,
        c.tn,
        c.fp,
        c.fn_,
        m.kind(),
        model.name(),
        a.eval_seed
    )?;
    out.flush()?;

    println!(
        "labels   {} ({} of {} reachable, {:.2?})",
        labels_path.display(),
        labels.positives(),
        labels.len(),
        label_time
    );
    println!(
        "metrics  accuracy {:.4} TPR {} FPR {}",
        r.accuracy,
        rate(r.tpr),
        rate(r.fpr)
    );
    println!("written  {}", a.out.display());
    Ok(())
}

pub fn place(a: PlaceArgs) -> Result<(), CliError> {
    let map = AnyMap::load(&a.map)?.into_rm4d(&a.map)?;
    let file = File::open(&a.grasps).map_err(|e| CliError::Data(format!("{}: {e}", a.grasps.display())))?;
    let sets = read_grasps_csv(file)?;
    let cell = a.cell_size.unwrap_or(map.params().l_c);

    let t = Instant::now();
    let spec = PlacementSpec::covering(&map, &sets, cell)?;
    let grids = sets
        .iter()
        .map(|s| aggregate_inverse(&map, s, &spec))
        .collect::<Result<Vec<_>, _>>()?;
    let combined = combine_min(&grids)?;
    let best = select_best(&combined);
    let grid_time = t.elapsed();

    std::fs::create_dir_all(&a.out_dir)?;
    let grid_path = a.out_dir.join("placement.csv");
    let mut out = create(&grid_path)?;
    combined.write_csv(&mut out)?;
    out.flush()?;
    let mut out = create(&a.out_dir.join("placement.json"))?;
    serde_json::to_writer_pretty(&mut out, &combined.sidecar_json(best.as_ref().ok()))
        .map_err(|e| CliError::Internal(e.to_string()))?;
    out.flush()?;

    let total: usize = sets.iter().map(|s| s.poses.len()).sum();
    println!(
        "grid     {} x {} cells of {} m, {} objects, {total} grasps",
        spec.n_x,
        spec.n_y,
        spec.cell_size,
        sets.len()
    );
    println!("timing   combined grid {grid_time:.3?}");
    let best = best?;

    let t = Instant::now();
    let kept: Vec<GraspSet> = sets
        .iter()
        .filter_map(|s| {
            let idx = filter_reachable(&map, (best.x, best.y), s);
            let poses = idx.iter().map(|&i| s.poses[i]).collect();
            GraspSet::new(s.object_id.clone(), poses).ok()
        })
        .collect();
    let query_time = t.elapsed();
    let kept_path = a.out_dir.join("reachable_grasps.csv");
    let mut out = create(&kept_path)?;
    write_grasps_csv(&mut out, &kept)?;
    out.flush()?;

    println!("timing   forward filtering {query_time:.3?}");
    println!("best     base at ({:.3}, {:.3}), score {}", best.x, best.y, best.score);
    for s in &sets {
        let n = kept
            .iter()
            .find(|k| k.object_id == s.object_id)
            .map_or(0, |k| k.poses.len());
        println!("object   {}: {n} of {} grasps reachable", s.object_id, s.poses.len());
    }
    println!(
        "written  {}, placement.json, {}",
        grid_path.display(),
        kept_path.display()
    );
    Ok(())
}

pub fn ablate(a: AblateArgs) -> Result<(), CliError> {
    if a.ranges.is_empty() {
        return Err(CliError::Usage("--ranges needs at least one value".into()));
    }
    let model = robots::load(&a.robot)?;
    let settings = AblationSettings {
        params: GridParams::with_degrees(model.reach_xy(), model.reach_z(), 0.05, 5.0)?,
        schedule: ConstructionSchedule::new(a.samples, a.samples.max(1), a.seed)?,
        eval_count: a.eval_count,
        eval_seed: a.eval_seed,
        ik: IkConfig::default(),
    };
    let rows = ablate_joint_limits(&model, &a.ranges, &settings, a.cache_dir.as_deref())?;

    let mut out = create(&a.out)?;
    writeln!(out, "range_deg,accuracy,tpr,fpr,positives,marked_cells,robot,seed")?;
    let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| x.to_string());
    for r in &rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.range_deg,
            r.rates.accuracy,
            opt(r.rates.tpr),
            opt(r.rates.fpr),
            r.positives,
            r.marked,
            model.name(),
            a.seed
        )?;
    }
    out.flush()?;
    for r in &rows {
        println!(
            "±{:<5} accuracy {:.4} TPR {} FPR {} ({} reachable)",
            r.range_deg,
            r.rates.accuracy,
            rate(r.rates.tpr),
            rate(r.rates.fpr),
            r.positives
        );
    }
    println!("written  {}", a.out.display());
    Ok(())
}

fn parse_centers(text: &str) -> Result<Vec<Vector3<f64>>, CliError> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|c| {
            let v = c
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| CliError::Usage(format!("center `{c}`: expected x,y,z")))?;
            match v[..] {
                [x, y, z] => Ok(Vector3::new(x, y, z)),
                _ => Err(CliError::Usage(format!("center `{c}`: expected x,y,z"))),
            }
        })
        .collect()
}

pub fn synth_grasps(a: SynthArgs) -> Result<(), CliError> {
    let centers = parse_centers(&a.centers)?;
    if centers.is_empty() || a.per_object == 0 {
        return Err(CliError::Usage(
            "need at least one center and one grasp per object".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let sets = centers
        .iter()
        .enumerate()
        .map(|(i, c)| synthesize_grasps(&format!("object{i}"), *c, a.per_object, a.spread, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = create(&a.out)?;
    write_grasps_csv(&mut out, &sets)?;
    out.flush()?;
    println!(
        "{} grasps for {} objects -> {}",
        a.per_object * sets.len(),
        sets.len(),
        a.out.display()
    );
    Ok(())
}
