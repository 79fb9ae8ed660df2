//! Campaign orchestration: deterministic seeded execution of many
//! trajectories over many instances, optionally across several models that
//! share the same noise realizations, with reduce-style aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

use crate::ct::{run_trajectory_ct, CtVariant};
use crate::dc::{run_trajectory_dc, DcQmeConfig, DcQmeState, DcVariant};
use crate::instances::{
    brute_force_ground, gen_discrete_instance, gen_wishart_planted, Instance, InstanceError,
    BRUTE_FORCE_LIMIT,
};
use crate::metrics::{
    cumulative_success_from_hits, mvmts, wilson_interval, Deviations, MvmtsResult,
};
use crate::noise::NoiseStream;
use crate::params::{derive_params, DerivedParams, ModelKind, ParamError, SystemParams, TauFormula};
use crate::qme::{run_trajectory_qme, QmeCtConfig, QmeError};
use crate::record::{EnergyCheck, ReadoutMode, RecordSpec, TrajectoryRecord};

/// Which instance ensemble a campaign draws from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    Discrete,
    Wishart,
    /// Pre-generated instance files in a directory (sorted by name).
    Files,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub ensemble: EnsembleKind,
    pub n: usize,
    pub count: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub seed: u64,
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

fn default_alpha() -> f64 {
    0.8
}

/// Full campaign description; the CLI reads this from a TOML file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CampaignConfig {
    /// One to three models run on identical noise streams.
    pub models: Vec<ModelKind>,
    pub params: SystemParams,
    pub tau_formula: TauFormula,
    pub instances: InstanceSpec,
    pub runs_per_instance: u32,
    pub t_end: f64,
    pub master_seed: u64,
    pub energy_check: EnergyCheck,
    pub readout: ReadoutMode,
    /// Cutoff etc. for the master-equation models.
    #[serde(default)]
    pub qme: QmeCtConfig,
    /// Euler sub-steps of the discrete-component intracavity segment.
    #[serde(default = "default_one")]
    pub dc_substeps: u32,
    /// Retain full observable rows every this many steps (heavy).
    #[serde(default)]
    pub record_stride: Option<usize>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// 0 = rayon default.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub allow_aborts: bool,
    /// Keep the per-task success table in the aggregate.
    #[serde(default)]
    pub per_run_table: bool,
}

fn default_one() -> u32 {
    1
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("no ground-state oracle: n = {n} exceeds the exhaustive bound {limit} and no planted energy is recorded")]
    NoGroundOracle { n: usize, limit: usize },
    #[error("campaign needs at least one instance and one model")]
    EmptyCampaign,
    #[error("model {0:?} is not runnable in a campaign (desk-scale two-mode pipeline; use the library API)")]
    UnsupportedModel(ModelKind),
    #[error("instance directory missing for the files ensemble")]
    MissingDir,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-model aggregate over the whole campaign.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelAggregate {
    pub model: ModelKind,
    pub trials: u64,
    pub successes: u64,
    pub ps: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// Cumulative success table (t, Ps'), downsampled; present in
    /// every-step mode.
    pub ps_prime: Option<Vec<(f64, f64)>>,
    /// Minimum matrix-vector-multiplications to solution and its time.
    pub min_mvmts: Option<(f64, f64)>,
    pub photon_final_mean: f64,
    pub photon_time_avg_mean: f64,
    pub clamp_events: u64,
    pub aborted: u64,
    /// Sign-adjusted final skew diagnostics averaged over trajectories:
    /// (3 S + C, S).
    pub skew_weight_mean: Option<(f64, f64)>,
    /// For the direct readout of the skew pipeline: the same states scored
    /// with the Gaussian readout.
    pub ps_swapped_readout: Option<f64>,
    pub swapped_successes: Option<u64>,
    /// Per-task success flags (None = aborted), when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_task: Option<Vec<Option<bool>>>,
    #[serde(skip)]
    pub per_task_success: Vec<Option<bool>>,
    #[serde(skip)]
    pub per_task_swapped: Vec<Option<bool>>,
}

/// Everything a campaign returns.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CampaignOutput {
    pub derived: DerivedParams,
    pub n_instances: usize,
    pub runs_per_instance: u32,
    pub models: Vec<ModelAggregate>,
    pub aborted_total: u64,
    /// d1/d2/d3 (skew vs Gaussian vs swapped-readout), when computable.
    pub deviations: Option<Deviations>,
}

struct TaskOutcome {
    success: Option<bool>,
    success_swapped: Option<bool>,
    first_hit_step: Option<u64>,
    photon_final: f64,
    photon_avg: f64,
    clamps: u64,
    skew_weight: Option<(f64, f64)>,
    aborted: bool,
}

fn run_one(
    model: ModelKind,
    inst: &Instance,
    e0: f64,
    cfg: &CampaignConfig,
    dp: &DerivedParams,
    noise_stream: &NoiseStream,
    instance_idx: u64,
    run_idx: u64,
) -> (TaskOutcome, Option<TrajectoryRecord>) {
    let spec = RecordSpec {
        stride: cfg.record_stride,
        e0: Some(e0),
        energy_check: cfg.energy_check,
        readout: cfg.readout,
    };
    let mut noise = noise_stream.trajectory(instance_idx, run_idx, inst.n);
    let res: Result<TrajectoryRecord, String> = match model {
        ModelKind::SkewGaussian | ModelKind::Gaussian | ModelKind::Gapp => {
            let variant = CtVariant::from_model(model).unwrap();
            run_trajectory_ct(inst, &cfg.params, dp, variant, cfg.t_end, &mut noise, &spec)
                .map_err(|e| e.to_string())
        }
        ModelKind::QmeCt => {
            run_trajectory_qme(inst, &cfg.params, dp, &cfg.qme, cfg.t_end, &mut noise, &spec)
                .map_err(|e: QmeError| e.to_string())
        }
        ModelKind::DcSkewGaussian | ModelKind::DcGaussian => {
            let variant = DcVariant::from_model(model).unwrap();
            run_trajectory_dc(
                inst,
                &cfg.params,
                dp,
                variant,
                cfg.dc_substeps,
                cfg.t_end,
                &mut noise,
                &spec,
            )
            .map_err(|e| e.to_string())
        }
        other => Err(format!("unsupported campaign model {other:?}")),
    };
    match res {
        Ok(rec) => {
            let success_swapped = rec.final_spins_direct_gaussian.as_ref().map(|spins| {
                let e = crate::instances::ising_energy(inst, spins).expect("dims");
                e <= e0 + crate::metrics::ENERGY_TOL
            });
            let out = TaskOutcome {
                success: rec.success,
                success_swapped,
                first_hit_step: rec.first_hit_step,
                photon_final: rec.photon_final,
                photon_avg: rec.photon_time_avg,
                clamps: rec.clamp_events,
                skew_weight: rec.skew_weight_final,
                aborted: false,
            };
            (out, Some(rec))
        }
        Err(_) => (
            TaskOutcome {
                success: None,
                success_swapped: None,
                first_hit_step: None,
                photon_final: f64::NAN,
                photon_avg: f64::NAN,
                clamps: 0,
                skew_weight: None,
                aborted: true,
            },
            None,
        ),
    }
}

fn build_instances(cfg: &CampaignConfig) -> Result<Vec<(Instance, f64)>, CampaignError> {
    let spec = &cfg.instances;
    let mut out = Vec::with_capacity(spec.count);
    match spec.ensemble {
        EnsembleKind::Discrete => {
            for idx in 0..spec.count {
                let inst = gen_discrete_instance(spec.n, spec.seed.wrapping_add(idx as u64))?;
                let e0 = ground_oracle(&inst)?;
                out.push((inst, e0));
            }
        }
        EnsembleKind::Wishart => {
            for idx in 0..spec.count {
                let inst =
                    gen_wishart_planted(spec.n, spec.alpha, spec.seed.wrapping_add(idx as u64))?;
                let e0 = inst.ground_energy.expect("planted energy");
                out.push((inst, e0));
            }
        }
        EnsembleKind::Files => {
            let dir = spec.dir.as_ref().ok_or(CampaignError::MissingDir)?;
            let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "txt"))
                .collect();
            paths.sort();
            for path in paths.into_iter().take(spec.count) {
                let inst = Instance::read_file(&path)?;
                let e0 = ground_oracle(&inst)?;
                out.push((inst, e0));
            }
        }
    }
    if out.is_empty() {
        return Err(CampaignError::EmptyCampaign);
    }
    Ok(out)
}

fn ground_oracle(inst: &Instance) -> Result<f64, CampaignError> {
    if let Some(e) = inst.ground_energy {
        return Ok(e);
    }
    if inst.n > BRUTE_FORCE_LIMIT {
        return Err(CampaignError::NoGroundOracle {
            n: inst.n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    Ok(brute_force_ground(inst)?.energy)
}

/// Run the configured campaign. Deterministic for a fixed config: noise is
/// keyed by (master seed, instance, run) and aggregation follows task order,
/// so thread count and scheduling cannot change any reported number.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignOutput, CampaignError> {
    if cfg.models.is_empty() {
        return Err(CampaignError::EmptyCampaign);
    }
    for m in &cfg.models {
        if matches!(m, ModelKind::DcQme) {
            return Err(CampaignError::UnsupportedModel(*m));
        }
    }
    let dp = derive_params(&cfg.params, cfg.tau_formula)?;
    let instances = build_instances(cfg)?;
    let noise_stream = NoiseStream::new(cfg.master_seed);
    let n_tasks = instances.len() * cfg.runs_per_instance as usize;
    let task_ids: Vec<(usize, u32)> = (0..instances.len())
        .flat_map(|i| (0..cfg.runs_per_instance).map(move |r| (i, r)))
        .collect();

    let run_all = || -> Vec<Vec<TaskOutcome>> {
        task_ids
            .par_iter()
            .map(|&(inst_idx, run_idx)| {
                let (inst, e0) = &instances[inst_idx];
                cfg.models
                    .iter()
                    .map(|&model| {
                        let (outcome, rec) = run_one(
                            model,
                            inst,
                            *e0,
                            cfg,
                            &dp,
                            &noise_stream,
                            inst_idx as u64,
                            run_idx as u64,
                        );
                        if let (Some(dir), Some(rec), Some(_)) =
                            (&cfg.out_dir, rec.as_ref(), cfg.record_stride)
                        {
                            let name = format!(
                                "traj_{:?}_{inst_idx:05}_{run_idx:04}.csv",
                                model
                            );
                            let _ = std::fs::write(dir.join(name), rec.to_csv());
                        }
                        outcome
                    })
                    .collect()
            })
            .collect()
    };

    let results: Vec<Vec<TaskOutcome>> = if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .expect("thread pool");
        pool.install(run_all)
    } else {
        run_all()
    };

    let n_steps = crate::ct::steps_for(cfg.t_end, cfg.params.dt) as usize;
    let mut aggregates = Vec::with_capacity(cfg.models.len());
    let mut aborted_total = 0u64;
    for (mi, &model) in cfg.models.iter().enumerate() {
        let outcomes: Vec<&TaskOutcome> = results.iter().map(|task| &task[mi]).collect();
        let aborted = outcomes.iter().filter(|o| o.aborted).count() as u64;
        aborted_total += aborted;
        let valid: Vec<&&TaskOutcome> = outcomes.iter().filter(|o| !o.aborted).collect();
        let trials = valid.len() as u64;
        let successes = valid
            .iter()
            .filter(|o| o.success == Some(true))
            .count() as u64;
        let ps = if trials > 0 {
            successes as f64 / trials as f64
        } else {
            0.0
        };
        let (wl, wh) = wilson_interval(successes, trials);
        let (ps_prime, min_mv) = if cfg.energy_check == EnergyCheck::EveryStep && n_steps > 0 {
            let hits: Vec<Option<u64>> = valid.iter().map(|o| o.first_hit_step).collect();
            let curve = cumulative_success_from_hits(&hits, n_steps)
                .unwrap_or_else(|_| vec![0.0; n_steps]);
            let ts: Vec<f64> = (1..=n_steps).map(|k| k as f64 * cfg.params.dt).collect();
            let MvmtsResult { per_t: _, min } = mvmts(&curve, &ts, cfg.params.dt);
            let stride = (n_steps / 200).max(1);
            let table: Vec<(f64, f64)> = (0..n_steps)
                .step_by(stride)
                .chain(std::iter::once(n_steps - 1))
                .map(|k| (ts[k], curve[k]))
                .collect();
            (Some(table), min)
        } else {
            (None, None)
        };
        let photon_final_mean =
            valid.iter().map(|o| o.photon_final).sum::<f64>() / trials.max(1) as f64;
        let photon_avg_mean =
            valid.iter().map(|o| o.photon_avg).sum::<f64>() / trials.max(1) as f64;
        let clamp_events = valid.iter().map(|o| o.clamps).sum();
        let skew_weight_mean = if valid.iter().all(|o| o.skew_weight.is_some()) && trials > 0 {
            let (a, b) = valid.iter().fold((0.0, 0.0), |(a, b), o| {
                let (w, s) = o.skew_weight.unwrap();
                (a + w, b + s)
            });
            Some((a / trials as f64, b / trials as f64))
        } else {
            None
        };
        let has_swapped = valid.iter().any(|o| o.success_swapped.is_some());
        let swapped_successes = if has_swapped {
            Some(
                valid
                    .iter()
                    .filter(|o| o.success_swapped == Some(true))
                    .count() as u64,
            )
        } else {
            None
        };
        let per_task_success: Vec<Option<bool>> = outcomes.iter().map(|o| o.success).collect();
        let per_task_swapped: Vec<Option<bool>> =
            outcomes.iter().map(|o| o.success_swapped).collect();
        aggregates.push(ModelAggregate {
            model,
            trials,
            successes,
            ps,
            wilson_low: wl,
            wilson_high: wh,
            ps_prime,
            min_mvmts: min_mv,
            photon_final_mean,
            photon_time_avg_mean: photon_avg_mean,
            clamp_events,
            aborted,
            skew_weight_mean,
            ps_swapped_readout: swapped_successes.map(|s| s as f64 / trials.max(1) as f64),
            swapped_successes,
            per_task: cfg.per_run_table.then(|| per_task_success.clone()),
            per_task_success,
            per_task_swapped,
        });
    }

    // deviation diagnostics when both closure levels ran
    let deviations = {
        let skew = aggregates
            .iter()
            .find(|a| matches!(a.model, ModelKind::SkewGaussian | ModelKind::DcSkewGaussian));
        let gauss = aggregates
            .iter()
            .find(|a| matches!(a.model, ModelKind::Gaussian | ModelKind::DcGaussian));
        match (skew, gauss) {
            (Some(s), Some(g)) if s.ps > 0.0 && g.ps > 0.0 => {
                let swapped = s.ps_swapped_readout.unwrap_or(s.ps);
                Some(crate::metrics::deviations(s.ps, g.ps, swapped))
            }
            _ => None,
        }
    };

    let output = CampaignOutput {
        derived: dp,
        n_instances: instances.len(),
        runs_per_instance: cfg.runs_per_instance,
        models: aggregates,
        aborted_total,
        deviations,
    };

    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(&output).expect("serialize aggregate");
        std::fs::write(dir.join("aggregate.json"), json)?;
    }
    debug_assert_eq!(n_tasks, results.len());
    Ok(output)
}

/// Library handle for the two-mode pipeline at desk scale (not dispatched by
/// campaigns; exercised directly by tests and examples).
pub fn run_dc_qme_trajectory(
    inst: &Instance,
    sp: &SystemParams,
    dp: &DerivedParams,
    cfg: &DcQmeConfig,
    t_end: f64,
    noise: &mut crate::noise::TrajectoryNoise,
) -> Result<DcQmeState, crate::dc::DcQmeError> {
    let steps = crate::ct::steps_for(t_end, sp.dt);
    let mut state = DcQmeState::vacuum(inst.n, cfg.nm_a, sp.e_init);
    let mut w = vec![0.0; inst.n];
    for _ in 0..steps {
        crate::dc::dc_qme_roundtrip(&mut state, inst, sp, dp, cfg, noise, &mut w)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::CacVariant;

    fn small_cfg() -> CampaignConfig {
        CampaignConfig {
            models: vec![ModelKind::SkewGaussian, ModelKind::Gaussian],
            params: SystemParams {
                p: 0.8,
                g2: 2.0,
                j: 5.0,
                r_ratio: 9.0,
                gj: 2.0,
                dt: 2.5e-4,
                beta: 0.1,
                tau0: 0.5,
                e_init: 0.4,
                cac: CacVariant::Standard,
                model: ModelKind::SkewGaussian,
            },
            tau_formula: TauFormula::ContinuousTime,
            instances: InstanceSpec {
                ensemble: EnsembleKind::Discrete,
                n: 4,
                count: 6,
                alpha: 0.8,
                seed: 11,
                dir: None,
            },
            runs_per_instance: 1,
            t_end: 0.25,
            master_seed: 7,
            energy_check: EnergyCheck::EveryStep,
            readout: ReadoutMode::Mean,
            qme: QmeCtConfig::default(),
            dc_substeps: 1,
            record_stride: None,
            out_dir: None,
            threads: 0,
            allow_aborts: false,
            per_run_table: false,
        }
    }

    #[test]
    fn campaign_is_deterministic_across_thread_counts() {
        let mut cfg = small_cfg();
        cfg.threads = 1;
        let a = run_campaign(&cfg).unwrap();
        cfg.threads = 2;
        let b = run_campaign(&cfg).unwrap();
        for (ma, mb) in a.models.iter().zip(&b.models) {
            assert_eq!(ma.successes, mb.successes);
            assert_eq!(ma.per_task_success, mb.per_task_success);
            assert_eq!(ma.photon_final_mean, mb.photon_final_mean);
        }
    }

    #[test]
    fn aggregate_json_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_cfg();
        cfg.out_dir = Some(dir.path().to_path_buf());
        run_campaign(&cfg).unwrap();
        let first = std::fs::read_to_string(dir.path().join("aggregate.json")).unwrap();
        run_campaign(&cfg).unwrap();
        let second = std::fs::read_to_string(dir.path().join("aggregate.json")).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn zero_horizon_emits_initial_state_only() {
        let mut cfg = small_cfg();
        cfg.t_end = 0.0;
        cfg.record_stride = Some(1);
        cfg.instances.count = 1;
        cfg.models = vec![ModelKind::SkewGaussian];
        let out = run_campaign(&cfg).unwrap();
        assert_eq!(out.models[0].trials, 1);
    }

    #[test]
    fn refuses_unsolvable_sizes() {
        let mut cfg = small_cfg();
        cfg.instances.n = 30;
        cfg.instances.count = 1;
        let err = run_campaign(&cfg).unwrap_err();
        assert!(matches!(err, CampaignError::NoGroundOracle { .. }));
    }

    #[test]
    fn wishart_campaign_uses_planted_energy() {
        let mut cfg = small_cfg();
        cfg.instances.ensemble = EnsembleKind::Wishart;
        cfg.instances.n = 30; // beyond brute force, planted energy available
        cfg.instances.count = 2;
        cfg.t_end = 0.05;
        cfg.models = vec![ModelKind::SkewGaussian];
        let out = run_campaign(&cfg).unwrap();
        assert_eq!(out.models[0].trials, 2);
    }

    #[test]
    fn cumulative_table_present_in_every_step_mode() {
        let out = run_campaign(&small_cfg()).unwrap();
        let table = out.models[0].ps_prime.as_ref().unwrap();
        assert!(!table.is_empty());
        for w in table.windows(2) {
            assert!(w[1].1 >= w[0].1, "cumulative curve decreased");
        }
    }
}
