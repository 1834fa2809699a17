//! Command-line driver: every experiment as a subcommand, config-file
//! driven, deterministic seeding, CSV outputs stamped with the producing
//! subcommand, config hash and seed.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::analysis;
use crate::config::{write_wake_params, ExperimentConfig};
use crate::control::{train, TrainSink};
use crate::error::{Result, VivError};
use crate::lockon::{self, SpeedPidGains};
use crate::plant::{self, calibrate, DecayMedium};
use crate::ppo::PpoConfig;
use crate::record::ArtifactMeta;
use crate::rl::load_policy;

const USAGE: &str = "\
vivrl <subcommand> --config PATH [options]

Subcommands:
  calibrate     fit wake-model constants to the lock-in and lock-on targets
  decay         free-decay identification in air and still water
  lockin-sweep  uncontrolled amplitude vs reduced velocity
  sine-sweep    PID-tracked sinusoidal rotation, amplitude vs frequency ratio
  train         PPO training run; writes log and checkpoints
  eval          deterministic rollout of the best checkpoint
  report        summarize artifacts in the output directory

Options:
  --config PATH   experiment config file (required)
  --seed N        override run.seed
  --out DIR       output directory (default: run.output_dir, else $VIVRL_OUT,
                  else ./vivrl_out)
  --episodes N    override run.episodes (train)
  --duration S    override loop.eval_duration_s (eval)
  --n-past N      override loop.n_past_actions
  --jobs N        parallel workers for sweep points
";

#[derive(Debug, Clone)]
pub struct CliArgs {
    pub subcommand: String,
    pub config_path: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub episodes: Option<usize>,
    pub duration: Option<f64>,
    pub n_past: Option<usize>,
    pub jobs: usize,
}

pub fn parse_args<I: IntoIterator<Item = String>>(argv: I) -> Result<CliArgs> {
    let mut it = argv.into_iter();
    let subcommand = it.next().ok_or_else(usage_err)?;
    let known = [
        "calibrate",
        "decay",
        "lockin-sweep",
        "sine-sweep",
        "train",
        "eval",
        "report",
    ];
    if !known.contains(&subcommand.as_str()) {
        return Err(VivError::Config(vec![
            format!("unknown subcommand '{subcommand}'"),
            USAGE.into(),
        ]));
    }
    let mut args = CliArgs {
        subcommand,
        config_path: PathBuf::new(),
        seed: None,
        out: None,
        episodes: None,
        duration: None,
        n_past: None,
        jobs: 1,
    };
    let mut config_seen = false;
    while let Some(flag) = it.next() {
        let mut value = |name: &str| -> Result<String> {
            it.next()
                .ok_or_else(|| VivError::Config(vec![format!("{name} needs a value")]))
        };
        match flag.as_str() {
            "--config" => {
                args.config_path = PathBuf::from(value("--config")?);
                config_seen = true;
            }
            "--seed" => {
                args.seed = Some(parse_num(&value("--seed")?, "--seed")?);
            }
            "--out" => args.out = Some(PathBuf::from(value("--out")?)),
            "--episodes" => {
                args.episodes = Some(parse_num(&value("--episodes")?, "--episodes")?);
            }
            "--duration" => {
                let v = value("--duration")?;
                args.duration = Some(v.parse::<f64>().map_err(|_| {
                    VivError::Config(vec![format!("--duration: expected seconds, got '{v}'")])
                })?);
            }
            "--n-past" => {
                args.n_past = Some(parse_num(&value("--n-past")?, "--n-past")?);
            }
            "--jobs" => {
                args.jobs = parse_num::<usize>(&value("--jobs")?, "--jobs")?.max(1);
            }
            other => {
                return Err(VivError::Config(vec![
                    format!("unknown flag '{other}'"),
                    USAGE.into(),
                ]))
            }
        }
    }
    if !config_seen {
        return Err(VivError::Config(vec![
            "--config PATH is required".into(),
            USAGE.into(),
        ]));
    }
    Ok(args)
}

fn usage_err() -> VivError {
    VivError::Config(vec![USAGE.into()])
}

fn parse_num<T: std::str::FromStr>(v: &str, flag: &str) -> Result<T> {
    v.parse::<T>()
        .map_err(|_| VivError::Config(vec![format!("{flag}: expected a number, got '{v}'")]))
}

/// Resolved execution context shared by the subcommands.
pub struct Run {
    pub cfg: ExperimentConfig,
    pub out_dir: PathBuf,
    pub jobs: usize,
}

impl Run {
    pub fn resolve(args: &CliArgs) -> Result<Self> {
        let mut cfg = ExperimentConfig::load(&args.config_path)?;
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        if let Some(episodes) = args.episodes {
            cfg.episodes = episodes;
        }
        if let Some(duration) = args.duration {
            cfg.episode.eval_duration_s = duration;
        }
        if let Some(n) = args.n_past {
            cfg.n_past_actions = n;
        }
        let out_dir = args
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .or_else(|| std::env::var_os("VIVRL_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("vivrl_out"));
        std::fs::create_dir_all(&out_dir)?;
        Ok(Self {
            cfg,
            out_dir,
            jobs: args.jobs,
        })
    }

    pub fn meta(&self, subcommand: &str) -> ArtifactMeta {
        ArtifactMeta {
            subcommand: subcommand.to_string(),
            config_hash: self.cfg.hash(),
            seed: self.cfg.seed,
        }
    }
}

pub fn run(args: &CliArgs) -> Result<()> {
    let run = Run::resolve(args)?;
    match args.subcommand.as_str() {
        "calibrate" => cmd_calibrate(&run),
        "decay" => cmd_decay(&run),
        "lockin-sweep" => cmd_lockin_sweep(&run),
        "sine-sweep" => cmd_sine_sweep(&run),
        "train" => cmd_train(&run),
        "eval" => cmd_eval(&run),
        "report" => cmd_report(&run),
        other => Err(VivError::Config(vec![format!("unknown subcommand {other}")])),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

/// Every artifact must exist and carry content; called before declaring a
/// command successful.
fn validate_outputs(paths: &[PathBuf]) -> Result<()> {
    for p in paths {
        let meta = std::fs::metadata(p)
            .map_err(|e| VivError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display()))))?;
        if meta.len() == 0 {
            return Err(VivError::Config(vec![format!(
                "output {} is empty",
                p.display()
            )]));
        }
    }
    Ok(())
}

pub fn cmd_calibrate(run: &Run) -> Result<()> {
    let meta = run.meta("calibrate");
    let report_path = run.out_dir.join("calibration_report.txt");
    match calibrate(
        run.cfg.cylinder,
        run.cfg.wake_starting_point(),
        &run.cfg.motor,
        &run.cfg.calibration,
    ) {
        Ok(report) => {
            let params_path = run.out_dir.join("wake_params.cfg");
            write_wake_params(&params_path, &report.params, &meta.header_line())?;
            let mut text = format!("{}\n", meta.header_line());
            text.push_str(&format!(
                "calibrated: vdp_epsilon = {}, coupling_a = {}, rotation_coupling = {}\n\
                 cost = {:.6}\n\n",
                report.params.vdp_epsilon,
                report.params.coupling_a,
                report.params.rotation_coupling,
                report.cost
            ));
            text.push_str(&report.log);
            write_text(&report_path, &text)?;
            validate_outputs(&[params_path, report_path])?;
            println!("calibration ok: wrote wake_params.cfg");
            Ok(())
        }
        Err(e) => {
            // The failure report is still written for inspection.
            write_text(
                &report_path,
                &format!("{}\ncalibration failed:\n{e}\n", meta.header_line()),
            )?;
            Err(e)
        }
    }
}

pub fn cmd_decay(run: &Run) -> Result<()> {
    let meta = run.meta("decay");
    let cyl = run.cfg.cylinder.validated()?;
    let wake = run.cfg.wake_starting_point();
    let y0 = run.cfg.decay_release_over_d * cyl.diameter_m;

    let mut summary = format!("{}\nmedium,f_hz,zeta\n", meta.header_line());
    for (medium, name) in [(DecayMedium::Air, "air"), (DecayMedium::StillWater, "water")] {
        let (f, z) = plant::free_decay(medium, y0, cyl, wake)?;
        summary.push_str(&format!("{name},{f:.6},{z:.8}\n"));
    }
    let path = run.out_dir.join("decay.csv");
    write_text(&path, &summary)?;
    validate_outputs(&[path])?;
    println!("decay identification written to decay.csv");
    Ok(())
}

/// Chunk a sweep across `jobs` workers; results keep the input order.
fn parallel_sweep<T, F>(points: &[f64], jobs: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(f64) -> Result<T> + Sync,
{
    if jobs <= 1 || points.len() <= 1 {
        return points.iter().map(|&p| f(p)).collect();
    }
    let chunk = points.len().div_ceil(jobs);
    let mut out: Vec<Option<Result<T>>> = Vec::new();
    out.resize_with(points.len(), || None);
    std::thread::scope(|scope| {
        for (slot_chunk, point_chunk) in out.chunks_mut(chunk).zip(points.chunks(chunk)) {
            let f = &f;
            scope.spawn(move || {
                for (slot, &p) in slot_chunk.iter_mut().zip(point_chunk) {
                    *slot = Some(f(p));
                }
            });
        }
    });
    out.into_iter().map(|r| r.expect("slot filled")).collect()
}

pub fn cmd_lockin_sweep(run: &Run) -> Result<()> {
    let meta = run.meta("lockin-sweep");
    let wake = run.cfg.wake_params(&run.out_dir)?;
    let cyl = run.cfg.cylinder.validated()?;
    let u_values = run.cfg.sweep_u.clone();
    let rows = parallel_sweep(&u_values, run.jobs, |u| {
        let pts = plant::amplitude_sweep(cyl, wake, &[u])?;
        Ok(pts[0])
    })?;
    let mut text = format!("{}\nu,a_over_d\n", meta.header_line());
    for (u, a) in rows {
        text.push_str(&format!("{u:.4},{a:.6}\n"));
    }
    let path = run.out_dir.join("lockin_sweep.csv");
    write_text(&path, &text)?;
    validate_outputs(&[path])?;
    println!("lock-in sweep written to lockin_sweep.csv");
    Ok(())
}

pub fn cmd_sine_sweep(run: &Run) -> Result<()> {
    let meta = run.meta("sine-sweep");
    let wake = run.cfg.wake_params(&run.out_dir)?;
    let plant = run.cfg.plant(wake)?;
    let f_n = plant.natural_frequency_hz();
    let gains = SpeedPidGains::tuned_for(
        &run.cfg.motor,
        run.cfg.flow.velocity_m_per_s,
        run.cfg.cylinder.diameter_m,
        f_n,
    );
    let ratios = run.cfg.sweep_ratios.clone();
    let alpha0 = run.cfg.sweep_alpha0;
    let points = parallel_sweep(&ratios, run.jobs, |ratio| {
        let pts = lockon::frequency_sweep(&plant, &run.cfg.motor, &[ratio], alpha0, &gains)?;
        Ok(pts[0])
    })?;
    let mut text = format!("{}\nratio,a_over_d,tracking_rms\n", meta.header_line());
    for p in points {
        text.push_str(&format!(
            "{:.4},{:.6},{:.6}\n",
            p.ratio, p.a_over_d, p.tracking_rms
        ));
    }
    let path = run.out_dir.join("sine_sweep.csv");
    write_text(&path, &text)?;
    validate_outputs(&[path])?;
    println!("lock-on sweep written to sine_sweep.csv");
    Ok(())
}

fn ppo_config(run: &Run) -> PpoConfig {
    run.cfg.ppo
}

pub fn cmd_train(run: &Run) -> Result<()> {
    let meta = run.meta("train");
    let wake = run.cfg.wake_params(&run.out_dir)?;
    let n = run.cfg.n_past_actions;
    let env = run.cfg.control_env(wake, n)?;
    let sink = TrainSink {
        log_csv: run.out_dir.join(format!("training_log_n{n}.csv")),
        best_checkpoint: run.out_dir.join(format!("best_n{n}.ckpt")),
        final_checkpoint: run.out_dir.join(format!("final_n{n}.ckpt")),
        meta: meta.clone(),
    };
    let out = train(&env, &ppo_config(run), run.cfg.episodes, run.cfg.seed, Some(&sink))?;
    if let Some(reason) = out.halted {
        return Err(VivError::Training(format!(
            "training halted early: {reason}; last checkpoint kept"
        )));
    }
    if out.history.is_empty() {
        println!("0-episode run: nothing to write");
        return Ok(());
    }
    validate_outputs(&[sink.log_csv, sink.best_checkpoint, sink.final_checkpoint])?;
    let last = out.history.last().unwrap();
    println!(
        "trained {} episodes (n = {n}); final mean reward {:.4}, best episode {:?}",
        out.history.len(),
        last.mean_reward,
        out.best_episode
    );
    Ok(())
}

pub fn cmd_eval(run: &Run) -> Result<()> {
    let meta = run.meta("eval");
    let wake = run.cfg.wake_params(&run.out_dir)?;
    let n = run.cfg.n_past_actions;
    let ckpt = run.out_dir.join(format!("best_n{n}.ckpt"));
    if !ckpt.exists() {
        return Err(VivError::Checkpoint(format!(
            "no checkpoint at {}; run `vivrl train` first",
            ckpt.display()
        )));
    }
    let (actor, _head) = load_policy(&ckpt)?;
    let env = run.cfg.control_env(wake, n)?;
    let out = env.evaluate_deterministic(&actor, run.cfg.episode.eval_duration_s, run.cfg.seed)?;

    let record_path = run.out_dir.join(format!("eval_n{n}.csv"));
    out.record.write_csv(&record_path, &meta)?;
    let summary_path = run.out_dir.join(format!("eval_summary_n{n}.csv"));
    let text = format!(
        "{}\nuncontrolled_a_over_d,controlled_a_over_d,suppression,dominant_freq_ratio,lead_in_s,duration_s\n\
         {:.6},{:.6},{:.6},{:.6},{:.3},{:.3}\n",
        meta.header_line(),
        out.uncontrolled_a_over_d,
        out.controlled_a_over_d,
        out.suppression,
        out.dominant_alpha_ratio,
        run.cfg.episode.eval_lead_in_s,
        run.cfg.episode.eval_duration_s,
    );
    write_text(&summary_path, &text)?;
    validate_outputs(&[record_path, summary_path])?;
    println!(
        "evaluation: suppression {:.3} (A/D {:.4} vs {:.4}), dominant ratio {:.2}",
        out.suppression, out.controlled_a_over_d, out.uncontrolled_a_over_d, out.dominant_alpha_ratio
    );
    Ok(())
}

fn read_csv_column(path: &Path, col: usize) -> Option<Vec<f64>> {
    let text = std::fs::read_to_string(path).ok()?;
    let mut out = Vec::new();
    for line in text.lines().skip(2) {
        let field = line.split(',').nth(col)?;
        out.push(field.parse().ok()?);
    }
    Some(out)
}

pub fn cmd_report(run: &Run) -> Result<()> {
    let meta = run.meta("report");
    let mut rows: Vec<(String, String, String)> = Vec::new();
    let mut notes = String::new();

    // fig4a: unforced lock-in curve.
    let lockin = run.out_dir.join("lockin_sweep.csv");
    if lockin.exists() {
        if let (Some(us), Some(amps)) = (read_csv_column(&lockin, 0), read_csv_column(&lockin, 1)) {
            let peak = amps.iter().cloned().fold(0.0, f64::max);
            let peak_u = us
                .iter()
                .zip(&amps)
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(u, _)| *u)
                .unwrap_or(0.0);
            rows.push(("fig4a".into(), "peak_a_over_d".into(), format!("{peak:.4}")));
            rows.push(("fig4a".into(), "peak_u".into(), format!("{peak_u:.2}")));
            let band: Vec<f64> = us
                .iter()
                .zip(&amps)
                .filter(|(_, &a)| a > 0.1)
                .map(|(u, _)| *u)
                .collect();
            if let (Some(lo), Some(hi)) = (band.first(), band.last()) {
                rows.push(("fig4a".into(), "band_u".into(), format!("{lo:.1}..{hi:.1}")));
            }
            notes.push_str("fig4a: lock-in amplitude curve from lockin_sweep.csv\n");
        }
    }

    // fig8: forced lock-on curve.
    let sine = run.out_dir.join("sine_sweep.csv");
    if sine.exists() {
        if let (Some(ratios), Some(amps)) = (read_csv_column(&sine, 0), read_csv_column(&sine, 1)) {
            if let Some((r, a)) = ratios
                .iter()
                .zip(&amps)
                .max_by(|x, y| x.1.total_cmp(y.1))
            {
                rows.push(("fig8".into(), "peak_ratio".into(), format!("{r:.2}")));
                rows.push(("fig8".into(), "peak_a_over_d".into(), format!("{a:.4}")));
            }
            if let Some(a16) = ratios
                .iter()
                .zip(&amps)
                .find(|(r, _)| (**r - 1.6).abs() < 1e-6)
                .map(|(_, a)| *a)
            {
                rows.push(("fig8".into(), "a_over_d_at_1.6".into(), format!("{a16:.4}")));
            }
            notes.push_str("fig8: sinusoidal lock-on response from sine_sweep.csv\n");
        }
    }

    // fig6/fig10: training logs; fig7/fig11: evaluations.
    for n in [0usize, 2] {
        let log = run.out_dir.join(format!("training_log_n{n}.csv"));
        if log.exists() {
            if let (Some(rewards), Some(alphas), Some(ratios)) = (
                read_csv_column(&log, 1),
                read_csv_column(&log, 2),
                read_csv_column(&log, 3),
            ) {
                let tail = rewards.len().saturating_sub(50);
                let fig = if n == 0 { "fig6" } else { "fig10" };
                rows.push((
                    fig.into(),
                    format!("final50_mean_reward_n{n}"),
                    format!("{:.4}", analysis::mean(&rewards[tail..])),
                ));
                rows.push((
                    fig.into(),
                    format!("final50_mean_alpha_n{n}"),
                    format!("{:.4}", analysis::mean(&alphas[tail..])),
                ));
                rows.push((
                    fig.into(),
                    format!("final50_freq_ratio_n{n}"),
                    format!("{:.3}", analysis::mean(&ratios[tail..])),
                ));
                notes.push_str(&format!("{fig}: training trends from training_log_n{n}.csv\n"));
            }
        }
        let summary = run.out_dir.join(format!("eval_summary_n{n}.csv"));
        if summary.exists() {
            if let Ok(text) = std::fs::read_to_string(&summary) {
                if let Some(data) = text.lines().nth(2) {
                    let fields: Vec<&str> = data.split(',').collect();
                    if fields.len() >= 4 {
                        let fig = if n == 0 { "fig7" } else { "fig11" };
                        rows.push((fig.into(), format!("suppression_n{n}"), fields[2].into()));
                        rows.push((
                            fig.into(),
                            format!("dominant_freq_ratio_n{n}"),
                            fields[3].into(),
                        ));
                        notes.push_str(&format!("{fig}: deterministic evaluation eval_summary_n{n}.csv\n"));
                    }
                }
            }
        }
    }

    if rows.is_empty() {
        return Err(VivError::Config(vec![format!(
            "no artifacts found in {}; run the experiment subcommands first",
            run.out_dir.display()
        )]));
    }

    let mut csv = format!("{}\nfigure,metric,value\n", meta.header_line());
    for (fig, metric, value) in &rows {
        csv.push_str(&format!("{fig},{metric},{value}\n"));
    }
    let csv_path = run.out_dir.join("report_summary.csv");
    write_text(&csv_path, &csv)?;

    let mut txt = format!("{}\nExperiment summary\n==================\n\n", meta.header_line());
    for (fig, metric, value) in &rows {
        txt.push_str(&format!("{fig:<6} {metric:<28} {value}\n"));
    }
    txt.push('\n');
    txt.push_str(&notes);
    let txt_path = run.out_dir.join("report.txt");
    write_text(&txt_path, &txt)?;
    validate_outputs(&[csv_path, txt_path])?;
    println!("report written to report_summary.csv and report.txt");
    Ok(())
}
