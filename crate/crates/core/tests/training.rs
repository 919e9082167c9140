use hydra_core::data::{synthesize_catchments, CatchmentDataset, SplitPlan, SynthConfig};
use hydra_core::models::{Architecture, Checkpoint, HeadHyperparameters, HyperparameterGrid, Hyperparameters, ModelSpec};
use hydra_core::training::{
    cross_validate, evaluation_loss, grid_sweep, record_years, train_model, Experiment, HydraNet, HydraTraining, Mode,
    TrainConfig, HYDRA_MULTI, HYDRA_SINGLE,
};
use hydra_core::Error;
use hydra_core::data::Batch;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn datasets(n: usize) -> Vec<CatchmentDataset> {
    synthesize_catchments(n, 6, 11, &SynthConfig::default()).unwrap()
}

fn config() -> TrainConfig {
    TrainConfig { window: 8, batch_size: 64, max_epochs: 3, patience: 3, ..TrainConfig::default() }
}

fn experiment(arch: Architecture) -> Experiment {
    let mut spec = ModelSpec::new(arch, 5);
    spec.hyperparameters.hidden_size = 6;
    spec.hyperparameters.num_layers = 1;
    spec.hyperparameters.learning_rate = 0.01;
    if arch == Architecture::Hydra {
        spec.hyperparameters.head = Some(HeadHyperparameters { hidden_size: 4, num_layers: 1 });
    }
    Experiment::new(spec)
}

fn holdout(d: &[CatchmentDataset]) -> SplitPlan {
    SplitPlan::holdout(&record_years(d), None).unwrap()
}

#[test]
fn every_architecture_trains_and_forecasts() {
    let d = datasets(3);
    let split = holdout(&d);
    let years = split.validation_years.clone();
    for arch in Architecture::ALL {
        let e = experiment(arch);
        let run = train_model(&e, &d, &split, &config()).unwrap();
        let forecasts = run.forecasts(&years).unwrap();
        assert_eq!(forecasts.keys().cloned().collect::<Vec<_>>().len(), e.variants().len(), "{arch}");
        for (variant, rows) in &forecasts {
            assert!(!rows.is_empty(), "{variant}");
            assert!(rows.iter().all(|r| r.q10.is_finite() && r.q50.is_finite() && r.q90.is_finite()), "{variant}");
            assert!(rows.iter().all(|r| years.contains(&chrono::Datelike::year(&r.date))));
        }
        assert!(!run.checkpoints().is_empty());
        assert!(run.records.iter().all(|r| r.epochs.len() <= 3 && r.n_training_examples > 0));
    }
}

#[test]
fn runs_replay_bit_for_bit() {
    let d = datasets(2);
    let split = holdout(&d);
    for arch in [Architecture::Flag, Architecture::Hydra] {
        let a = train_model(&experiment(arch), &d, &split, &config()).unwrap();
        let b = train_model(&experiment(arch), &d, &split, &config()).unwrap();
        assert_eq!(a.records, b.records);
        let ca: Vec<String> = a.checkpoints().iter().map(|(_, c)| c.to_json().unwrap()).collect();
        let cb: Vec<String> = b.checkpoints().iter().map(|(_, c)| c.to_json().unwrap()).collect();
        assert_eq!(ca, cb);
    }
}

#[test]
fn heads_before_body_is_an_ordering_error() {
    let d = datasets(2);
    let mut h = HydraTraining::new(&experiment(Architecture::Hydra), &d, &holdout(&d), &config()).unwrap();
    assert!(matches!(h.run_phase2(None), Err(Error::Ordering(_))));
    assert!(matches!(h.train_head("basin_00", None), Err(Error::Ordering(_))));
}

#[test]
fn head_training_leaves_the_body_unchanged() {
    let d = datasets(2);
    let mut h = HydraTraining::new(&experiment(Architecture::Hydra), &d, &holdout(&d), &config()).unwrap();
    h.run_phase1().unwrap();
    let body = Checkpoint::capture(&h.model.body);
    let multi = Checkpoint::capture(&h.model.multi_head);
    h.run_phase2(None).unwrap();
    assert_eq!(Checkpoint::capture(&h.model.body), body);
    assert_eq!(Checkpoint::capture(&h.model.multi_head), multi);
    assert_eq!(h.model.single_heads.len(), 2);
}

#[test]
fn cached_and_recomputed_encodings_agree() {
    let d = datasets(2);
    let mut h = HydraTraining::new(&experiment(Architecture::Hydra), &d, &holdout(&d), &config()).unwrap();
    h.run_phase1().unwrap();
    let (cached, rc, _) = h.train_head("basin_01", Some(true)).unwrap();
    let (fresh, rf, _) = h.train_head("basin_01", Some(false)).unwrap();
    let (a, b) = (Checkpoint::capture(&cached), Checkpoint::capture(&fresh));
    for (x, y) in a.parameters.iter().zip(&b.parameters) {
        for (u, v) in x.values.iter().zip(&y.values) {
            assert!((u - v).abs() <= 1e-10, "{}: {u} vs {v}", x.name);
        }
    }
    for (x, y) in rc.epochs.iter().zip(&rf.epochs) {
        assert!((x.validation_loss - y.validation_loss).abs() <= 1e-10);
    }
}

#[test]
fn head_job_order_does_not_matter() {
    let d = datasets(3);
    let mut h = HydraTraining::new(&experiment(Architecture::Hydra), &d, &holdout(&d), &config()).unwrap();
    h.run_phase1().unwrap();
    let mut forward = h.clone();
    let mut backward = h.clone();
    let ids = h.head_catchments();
    let reversed: Vec<String> = ids.iter().rev().cloned().collect();
    forward.run_phase2(Some(&ids)).unwrap();
    backward.run_phase2(Some(&reversed)).unwrap();
    assert_eq!(forward.model.single_heads, backward.model.single_heads);
}

#[test]
fn uninformative_extra_costs_little() {
    let mut d = datasets(3);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for c in &mut d {
        let noise = (0..c.len()).map(|_| rng.sample(StandardNormal)).collect();
        c.dynamic.insert("noise".into(), noise);
    }
    let mut e = experiment(Architecture::Hydra);
    e.extras = vec!["noise".into()];
    let cfg = TrainConfig { max_epochs: 40, patience: 10, ..config() };
    let split = holdout(&d);
    let mut h = HydraTraining::new(&e, &d, &split, &cfg).unwrap();
    h.run_phase1().unwrap();
    h.run_phase2(None).unwrap();
    let net = HydraNet { body: h.model.body.clone(), head: h.model.multi_head.clone(), data: &h.data };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for record in &h.head_records {
        let id = record.job.rsplit('/').next().unwrap();
        let c = h.data.catchment_index(id).unwrap();
        let days = h
            .data
            .example_days(c, &hydra_core::data::Selection { years: &split.validation_years, ..Default::default() })
            .unwrap();
        let multi = evaluation_loss(&net, &[Batch { catchment: c, days }], Mode::Eval, &mut rng).unwrap();
        let single = record.best_validation_loss.unwrap();
        assert!(single <= multi * 1.05, "{id}: head {single} vs multi-catchment {multi}");
    }
}

#[test]
fn cross_validation_is_independent_of_job_count() {
    let d = datasets(2);
    let e = experiment(Architecture::MultiCatchmentWithQ);
    let cfg = TrainConfig { max_epochs: 2, ..config() };
    let one = cross_validate(&e, &d, 2, None, &cfg, 1).unwrap();
    let two = cross_validate(&e, &d, 2, None, &cfg, 2).unwrap();
    assert_eq!(one.reports, two.reports);
    let report = &one.reports["multi_catchment_with_q"];
    assert_eq!(report.folds.len(), 2);
    assert_eq!(report.basin_years.len(), 4);
}

#[test]
fn hydra_cross_validation_scores_both_heads() {
    let d = datasets(2);
    let cfg = TrainConfig { max_epochs: 2, ..config() };
    let cv = cross_validate(&experiment(Architecture::Hydra), &d, 1, None, &cfg, 1).unwrap();
    assert!(cv.reports.contains_key(HYDRA_MULTI) && cv.reports.contains_key(HYDRA_SINGLE));
}

#[test]
fn sweep_ranks_cells_by_validation_loss() {
    let d = datasets(2);
    let e = experiment(Architecture::MultiCatchmentNoQ);
    let base = Hyperparameters { hidden_size: 4, num_layers: 1, learning_rate: 0.01, dropout: 0.0, head: None };
    let mut grid = HyperparameterGrid::single(base);
    grid.hidden_sizes = vec![2, 4];
    grid.learning_rates = vec![0.0001, 0.01];
    let result = grid_sweep(&e, &grid, &d, None, &TrainConfig { max_epochs: 2, ..config() }, 2).unwrap();
    assert_eq!(result.cells.len(), 4);
    let losses: Vec<f64> = result.ranking.iter().map(|&i| result.cells[i].validation_loss.unwrap()).collect();
    assert!(losses.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(result.winner().unwrap().index, result.ranking[0]);
}
