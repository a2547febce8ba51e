//! Closed-loop simulation runs and the experiment drivers built on them.
//!
//! Order of work inside one control period k:
//!
//! 1. measure stator currents and speed from the plant
//! 2. backtrack the correction term `G(k)`
//! 3. outer loop: speed PI, slip, flux angle, current references
//! 4. select the state for period k+1 given the state committed for k
//! 5. apply the committed state over `Ts` through the plant integrator
//! 6. accumulate metrics; at block boundaries run the tuner

use rayon::prelude::*;

use crate::autotuner::AutoTuner;
use crate::config::{Config, RefStep, SetPoint, WfMode};
use crate::cost::{select, WeightVector};
use crate::error::{Error, Result};
use crate::machine::{Plant, PlantState};
use crate::metrics::{MetricsAccumulator, MetricsBlock};
use crate::outer_loop::{current_references, OuterLoop};
use crate::predictor::{Currents, Predictor};
use crate::vsi::{switch_changes, VoltageTable, VsiState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRecord {
    pub k: u64,
    pub t: f64,
    pub reference: Currents,
    pub current: Currents,
    /// State applied over this period.
    pub u: VsiState,
    /// State selected during this period for the next one.
    pub u_next: VsiState,
    /// Commutations at the start of this period.
    pub sc: u32,
    pub cost: f64,
    pub omega_ref: f64,
    pub omega: f64,
    pub lambda: WeightVector,
    /// |G(k)| before any filtering.
    pub correction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRecord {
    pub metrics: MetricsBlock,
    pub gamma2_ref: f64,
    pub gamma3_ref: f64,
    /// Weights in force after this block's tuner update.
    pub lambda_next: WeightVector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultRecord {
    pub t: f64,
    pub last_good_t: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub samples: Vec<SampleRecord>,
    pub blocks: Vec<BlockRecord>,
    /// Number of control periods simulated.
    pub sample_count: u64,
    pub max_correction: f64,
    /// Sum of squared speed errors, kept even when samples are not logged.
    pub speed_sq_err: f64,
    pub fault: Option<FaultRecord>,
}

impl RunLog {
    /// RMS of `ω* - ω` over the run (rad/s).
    pub fn speed_rms(&self) -> f64 {
        if self.sample_count == 0 {
            return 0.0;
        }
        (self.speed_sq_err / self.sample_count as f64).sqrt()
    }
}

/// Number of control periods covered by `duration`.
pub fn sample_count(duration: f64, ts: f64) -> u64 {
    (duration / ts + 1e-9).floor() as u64
}

fn schedule_value(points: &[SetPoint], t: f64, default: f64) -> f64 {
    points
        .iter()
        .take_while(|p| p.t <= t)
        .last()
        .map_or(default, |p| p.value)
}

/// Simulates `cfg.scenario` end to end.
pub fn run(cfg: &Config) -> Result<RunLog> {
    cfg.validate()?;
    let sc = &cfg.scenario;
    let p = &cfg.machine;
    let ts = p.ts;
    let n = sample_count(sc.duration, ts);

    let plant = Plant::new(p.clone(), cfg.plant.clone());
    let table = VoltageTable::new(p.vdc);
    let first_ref = schedule_value(&sc.speed, 0.0, 0.0);
    let mut state = PlantState {
        omega: sc.initial_speed.unwrap_or(first_ref),
        ..Default::default()
    };
    let mut outer = OuterLoop::new(cfg.outer_loop.clone(), p);
    let mut predictor = Predictor::new(p.clone(), cfg.predictor.clone(), state.omega);
    let mut acc = MetricsAccumulator::new(&cfg.metrics, ts);
    let mut tuner = AutoTuner::new(cfg.tuner.clone(), cfg.block_period());

    let mut lambda = cfg.tuner.initial;
    let mut wf_steps = sc.wf_steps.iter().peekable();
    let mut ref_steps = sc.ref_steps.iter().peekable();
    let mut u_prev = VsiState::default();
    let mut u_applied = VsiState::default();
    let mut omega_cmd = state.omega;

    let mut log = RunLog {
        samples: Vec::with_capacity(if sc.log_samples { n as usize } else { 0 }),
        ..Default::default()
    };

    for k in 0..n {
        let t = k as f64 * ts;
        if sc.mode == WfMode::Fixed {
            while let Some(step) = wf_steps.next_if(|s| s.t <= t) {
                lambda = step.weights();
            }
        }
        let target = schedule_value(&sc.speed, t, first_ref);
        omega_cmd = if sc.speed_ramp > 0.0 {
            let dv = sc.speed_ramp * ts;
            omega_cmd + (target - omega_cmd).clamp(-dv, dv)
        } else {
            target
        };
        let t_load = schedule_value(&sc.load, t, 0.0);

        let is = Currents::from(state.stator_currents());
        predictor.refresh(state.omega);
        let raw_g = predictor.correct(&is);
        let frame = outer.update(omega_cmd, state.omega)?;
        let reference = current_references(&frame, 0.0);
        let reference_k2 = current_references(&frame, 2.0 * ts);
        predictor.commit_one_step(&is, u_applied);
        let sel = select(
            &reference_k2,
            &is,
            u_applied,
            predictor.model(),
            predictor.correction(),
            &lambda,
        );

        let next = match plant.step(&state, table.get(u_applied), t_load, ts) {
            Ok(s) => s,
            Err(Error::IntegrationFault { t, last_good_t }) => {
                log.fault = Some(FaultRecord { t, last_good_t });
                break;
            }
            Err(e) => return Err(e),
        };

        let switched = switch_changes(u_prev, u_applied);
        let err = reference - is;
        acc.accumulate([err[0], err[1]], [err[2], err[3]], switched, frame.omega_e, state.omega);
        log.max_correction = log.max_correction.max(raw_g.norm());
        log.speed_sq_err += (omega_cmd - state.omega).powi(2);
        log.sample_count += 1;
        if sc.log_samples {
            log.samples.push(SampleRecord {
                k,
                t,
                reference,
                current: is,
                u: u_applied,
                u_next: sel.u_opt,
                sc: switched,
                cost: sel.cost,
                omega_ref: omega_cmd,
                omega: state.omega,
                lambda,
                correction: raw_g.norm(),
            });
        }

        state = next;
        state.t = (k + 1) as f64 * ts;
        u_prev = u_applied;
        u_applied = sel.u_opt;

        if acc.is_full() {
            let block = acc.finalize(lambda)?;
            if sc.mode == WfMode::Adaptive {
                while let Some(step) = ref_steps.next_if(|s| s.t <= block.t_end) {
                    apply_ref_step(&mut tuner, step)?;
                }
                lambda = tuner.step(&block);
            }
            log.blocks.push(BlockRecord {
                metrics: block,
                gamma2_ref: tuner.config().gamma2_ref,
                gamma3_ref: tuner.config().gamma3_ref,
                lambda_next: lambda,
            });
        }
    }
    Ok(log)
}

fn apply_ref_step(tuner: &mut AutoTuner, step: &RefStep) -> Result<()> {
    let cur = tuner.config();
    let g2 = step.gamma2.unwrap_or(cur.gamma2_ref);
    let g3 = step.gamma3.unwrap_or(cur.gamma3_ref);
    tuner.set_references(g2, g3)
}

/// Mean and population standard deviation of the three indices over a set
/// of blocks.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GammaStats {
    pub count: usize,
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

pub fn gamma_stats<'a>(blocks: impl IntoIterator<Item = &'a BlockRecord>) -> GammaStats {
    let vals: Vec<[f64; 3]> = blocks
        .into_iter()
        .map(|b| [b.metrics.gamma1, b.metrics.gamma2, b.metrics.gamma3])
        .collect();
    let n = vals.len();
    if n == 0 {
        return GammaStats::default();
    }
    let mut mean = [0.0; 3];
    for v in &vals {
        for i in 0..3 {
            mean[i] += v[i] / n as f64;
        }
    }
    let mut std = [0.0; 3];
    for v in &vals {
        for i in 0..3 {
            std[i] += (v[i] - mean[i]).powi(2) / n as f64;
        }
    }
    GammaStats {
        count: n,
        mean,
        std: std.map(f64::sqrt),
    }
}

/// Blocks lying entirely in `[t0, t1)` (block end time is used, block start
/// is `t_end - N·Ts`).
pub fn blocks_between(log: &RunLog, block_period: f64, t0: f64, t1: f64) -> Vec<BlockRecord> {
    log.blocks
        .iter()
        .filter(|b| b.metrics.t_end - block_period >= t0 - 1e-12 && b.metrics.t_end <= t1 + 1e-12)
        .copied()
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepSummary {
    pub pre: GammaStats,
    pub post: GammaStats,
    /// Sign of `post - pre` for Γ1, Γ2, Γ3.
    pub direction: [i8; 3],
    pub log: RunLog,
}

impl StepSummary {
    pub fn change(&self, i: usize) -> f64 {
        self.post.mean[i] - self.pre.mean[i]
    }
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Fixed-weight run with one weight change at `cfg.step_wf.t_step`.
///
/// The pre-step average uses the blocks after the initial discard; the
/// post-step average skips one block after the step.
pub fn step_wf_test(cfg: &Config, pre: WeightVector, post: WeightVector) -> Result<StepSummary> {
    let mut c = cfg.clone();
    let t_step = cfg.step_wf.t_step;
    c.scenario.mode = WfMode::Fixed;
    c.scenario.ref_steps.clear();
    c.tuner.initial = pre;
    c.scenario.wf_steps = vec![crate::config::WfStep {
        t: t_step,
        lambda_xy: post.lambda_xy,
        lambda_sc: post.lambda_sc,
    }];
    if !(t_step > 0.0 && t_step < c.scenario.duration) {
        return Err(Error::config("step_wf.t_step", "must lie inside the scenario duration"));
    }
    let log = run(&c)?;
    let bp = c.block_period();
    let t_discard = c.scenario.discard_blocks as f64 * bp;
    let pre_stats = gamma_stats(&blocks_between(&log, bp, t_discard, t_step));
    let post_stats = gamma_stats(&blocks_between(&log, bp, t_step + bp, c.scenario.duration));
    let direction = std::array::from_fn(|i| sign(post_stats.mean[i] - pre_stats.mean[i]));
    Ok(StepSummary {
        pre: pre_stats,
        post: post_stats,
        direction,
        log,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReversalOutcome {
    pub adaptive: RunLog,
    pub fixed: RunLog,
}

impl ReversalOutcome {
    pub fn rms(&self) -> (f64, f64) {
        (self.adaptive.speed_rms(), self.fixed.speed_rms())
    }
}

/// Speed set-point `+ω → -ω` at `cfg.reversal.t_reverse`, once with the
/// tuner active and once with the initial weights held.
pub fn reversal_test(cfg: &Config, omega_target: f64) -> Result<ReversalOutcome> {
    if !(omega_target.is_finite() && omega_target != 0.0) {
        return Err(Error::config("reversal.omega_target", "must be finite and non-zero"));
    }
    let mut c = cfg.clone();
    c.scenario.speed = vec![
        SetPoint { t: 0.0, value: omega_target },
        SetPoint { t: cfg.reversal.t_reverse, value: -omega_target },
    ];
    c.scenario.initial_speed = Some(omega_target);
    c.scenario.wf_steps.clear();
    c.scenario.ref_steps.clear();
    let mut adaptive_cfg = c.clone();
    adaptive_cfg.scenario.mode = WfMode::Adaptive;
    let mut fixed_cfg = c;
    fixed_cfg.scenario.mode = WfMode::Fixed;
    let (adaptive, fixed) = rayon::join(|| run(&adaptive_cfg), || run(&fixed_cfg));
    Ok(ReversalOutcome {
        adaptive: adaptive?,
        fixed: fixed?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub lambda: WeightVector,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub switch_rate: f64,
}

/// One fixed-weight steady-state run per grid point. Rows keep the grid
/// order regardless of how many worker threads run them.
pub fn pareto_sweep(cfg: &Config, grid: &[WeightVector], jobs: usize) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::config("sweep", "grid must not be empty"));
    }
    let one = |w: &WeightVector| -> Result<SweepRow> {
        let mut c = cfg.clone();
        c.scenario.mode = WfMode::Fixed;
        c.scenario.wf_steps.clear();
        c.scenario.ref_steps.clear();
        c.scenario.log_samples = false;
        c.tuner.initial = *w;
        let log = run(&c)?;
        let kept = &log.blocks[c.scenario.discard_blocks.min(log.blocks.len())..];
        let stats = gamma_stats(kept);
        let rate = kept.iter().map(|b| b.metrics.switch_rate).sum::<f64>() / kept.len().max(1) as f64;
        Ok(SweepRow {
            lambda: *w,
            gamma1: stats.mean[0],
            gamma2: stats.mean[1],
            gamma3: stats.mean[2],
            switch_rate: rate,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config("jobs", e.to_string()))?;
    pool.install(|| grid.par_iter().map(one).collect())
}

/// Cartesian grid in `lambda_xy`-major order.
pub fn sweep_grid(lambda_xy: &[f64], lambda_sc: &[f64]) -> Vec<WeightVector> {
    lambda_xy
        .iter()
        .flat_map(|&x| lambda_sc.iter().map(move |&s| WeightVector::new(x, s)))
        .collect()
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
