//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see every line.
//! Criterion 8 needs a local copy of the U2OS nuclei dataset and is skipped
//! unless `U2OS_DIR` is set (see README).

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mrfseg::bitplane;
use mrfseg::ensemble::{threshold_confidence, ConfidenceMap, EnsembleConfig, Optimizer};
use mrfseg::harness::{emit_roc, run_batch, write_batch_csvs, RunConfig};
use mrfseg::imageio::{save_gray, save_mask, BinaryMask, GrayImage};
use mrfseg::metrics;
use mrfseg::mrf::{
    global_energy, icm, simulated_annealing, ClassParams, LabelField, MrfModel, Neighborhood,
    SaSchedule,
};
use mrfseg::synth;

fn report(n: u32, what: &str, outcome: Result<(), String>) {
    match &outcome {
        Ok(()) => println!("[PASS] criterion {n}: {what}"),
        Err(msg) => println!("[FAIL] criterion {n}: {what} - {msg}"),
    }
    if let Err(msg) = outcome {
        panic!("criterion {n} failed: {msg}");
    }
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, budget: Duration) -> Result<(), String> {
    check(
        elapsed <= budget,
        format!("took {elapsed:?}, budget {budget:?}"),
    )
}

fn random_gray(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
    GrayImage::new(w, h, (0..w * h).map(|_| rng.gen()).collect()).unwrap()
}

fn random_labels(rng: &mut ChaCha8Rng, w: usize, h: usize) -> LabelField {
    LabelField::new(w, h, (0..w * h).map(|_| rng.gen_range(0..2u8)).collect()).unwrap()
}

fn random_model(rng: &mut ChaCha8Rng) -> MrfModel {
    MrfModel {
        params: [
            ClassParams {
                mean: rng.gen_range(0.0..255.0),
                std: rng.gen_range(0.5..60.0),
            },
            ClassParams {
                mean: rng.gen_range(0.0..255.0),
                std: rng.gen_range(0.5..60.0),
            },
        ],
        beta: rng.gen_range(0.1..4.0),
        neighborhood: if rng.gen_bool(0.5) {
            Neighborhood::Four
        } else {
            Neighborhood::Eight
        },
    }
}

#[test]
fn criterion_01_bitplane_round_trip() {
    let run = || -> Result<(), String> {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for i in 0..1000 {
            let w = rng.gen_range(1..=64);
            let h = rng.gen_range(1..=64);
            let img = random_gray(&mut rng, w, h);
            let rec = bitplane::reconstruct(&bitplane::slice(&img))
                .map_err(|e| format!("reconstruct failed: {e}"))?;
            check(rec == img, format!("round trip differs on image {i}"))?;
        }
        within(start.elapsed(), Duration::from_secs(5))
    };
    report(1, "bit-plane round-trip on 1000 random images", run());
}

/// Independently written oracle: sum every ordered neighbor pair and halve.
fn pair_enumeration_energy(image: &GrayImage, labels: &LabelField, m: &MrfModel) -> f64 {
    let (w, h) = (labels.width() as isize, labels.height() as isize);
    let offsets: Vec<(isize, isize)> = match m.neighborhood {
        Neighborhood::Four => vec![(1, 0), (-1, 0), (0, 1), (0, -1)],
        Neighborhood::Eight => (-1..=1)
            .flat_map(|dy| (-1..=1).map(move |dx| (dx, dy)))
            .filter(|&(dx, dy)| !(dx == 0 && dy == 0))
            .collect(),
    };
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            let label = labels.get(x as usize, y as usize);
            let p = m.params[label as usize];
            let d = image.get(x as usize, y as usize) as f64 - p.mean;
            total +=
                ((2.0 * std::f64::consts::PI).sqrt() * p.std).ln() + d * d / (2.0 * p.std * p.std);
            let mut pair_sum = 0.0;
            for &(dx, dy) in &offsets {
                let (nx, ny) = (x + dx, y + dy);
                if (0..w).contains(&nx) && (0..h).contains(&ny) {
                    let other = labels.get(nx as usize, ny as usize);
                    pair_sum += if label == other { -m.beta } else { m.beta };
                }
            }
            total += pair_sum / 2.0;
        }
    }
    total
}

#[test]
fn criterion_02_energy_oracle_equivalence() {
    let run = || -> Result<(), String> {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(202);
        for i in 0..200 {
            let w = rng.gen_range(1..=5);
            let h = rng.gen_range(1..=5);
            let img = random_gray(&mut rng, w, h);
            let labels = random_labels(&mut rng, w, h);
            let m = random_model(&mut rng);
            let fast = global_energy(&img, &labels, &m).map_err(|e| e.to_string())?;
            let oracle = pair_enumeration_energy(&img, &labels, &m);
            let rel = (fast - oracle).abs() / oracle.abs().max(1.0);
            check(
                rel < 1e-9,
                format!("instance {i}: {fast} vs oracle {oracle} (rel {rel:e})"),
            )?;
        }
        within(start.elapsed(), Duration::from_secs(5))
    };
    report(2, "global energy matches pair-enumeration oracle", run());
}

#[test]
fn criterion_03_icm_descent() {
    let run = || -> Result<(), String> {
        let mut rng = ChaCha8Rng::seed_from_u64(303);
        for i in 0..200 {
            let img = random_gray(&mut rng, 8, 8);
            let mut labels = random_labels(&mut rng, 8, 8);
            let m = random_model(&mut rng);
            // drive sweeps one at a time so every intermediate energy is visible
            let mut energy = global_energy(&img, &labels, &m).map_err(|e| e.to_string())?;
            for sweep in 0..20 {
                let (next, report) = icm(&img, &labels, &m, 1, false).map_err(|e| e.to_string())?;
                let next_energy = global_energy(&img, &next, &m).map_err(|e| e.to_string())?;
                check(
                    next_energy <= energy,
                    format!("instance {i} sweep {sweep}: {energy} -> {next_energy}"),
                )?;
                energy = next_energy;
                labels = next;
                if report.converged {
                    break;
                }
            }
        }
        Ok(())
    };
    report(3, "ICM energy non-increasing across sweeps", run());
}

#[test]
fn criterion_04_sa_reaches_exhaustive_optimum() {
    let run = || -> Result<(), String> {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        for instance in 0..20 {
            let img = random_gray(&mut rng, 3, 3);
            let init = random_labels(&mut rng, 3, 3);
            // t0 = 4 bounds the single-flip barriers the chain can cross, so
            // couplings are drawn with 2 * degree * beta <= 3 * t0 for either
            // neighborhood; hotter landscapes would need a hotter schedule
            // than this criterion pins.
            let nb = if rng.gen_bool(0.5) {
                Neighborhood::Eight
            } else {
                Neighborhood::Four
            };
            let beta_cap = if nb == Neighborhood::Four { 1.5 } else { 0.75 };
            let m = MrfModel {
                params: [
                    ClassParams {
                        mean: rng.gen_range(0.0..255.0),
                        std: rng.gen_range(0.5..60.0),
                    },
                    ClassParams {
                        mean: rng.gen_range(0.0..255.0),
                        std: rng.gen_range(0.5..60.0),
                    },
                ],
                beta: rng.gen_range(0.1..beta_cap),
                neighborhood: nb,
            };
            let mut exhaustive_min = f64::INFINITY;
            for bits in 0..512u32 {
                let labels: Vec<u8> = (0..9).map(|b| ((bits >> b) & 1) as u8).collect();
                let field = LabelField::new(3, 3, labels).unwrap();
                let e = global_energy(&img, &field, &m).map_err(|e| e.to_string())?;
                exhaustive_min = exhaustive_min.min(e);
            }
            let mut hits = 0;
            for seed in 0..100 {
                let schedule = SaSchedule {
                    t0: 4.0,
                    cooling: 0.97,
                    t_min: 0.01,
                    seed,
                };
                let (_, report) = simulated_annealing(&img, &init, &m, &schedule, false)
                    .map_err(|e| e.to_string())?;
                if report.final_energy <= exhaustive_min + 1e-9 * exhaustive_min.abs().max(1.0) {
                    hits += 1;
                }
            }
            check(
                hits >= 95,
                format!("instance {instance}: only {hits}/100 seeds reached the optimum"),
            )?;
        }
        within(start.elapsed(), Duration::from_secs(120))
    };
    report(4, "SA finds the exhaustive optimum on 3x3 instances", run());
}

#[test]
fn criterion_05_metric_identities() {
    let run = || -> Result<(), String> {
        let mut rng = ChaCha8Rng::seed_from_u64(505);
        for i in 0..1000 {
            let len = rng.gen_range(1..128);
            let seg =
                BinaryMask::new(len, 1, (0..len).map(|_| rng.gen_range(0..2)).collect()).unwrap();
            let gt =
                BinaryMask::new(len, 1, (0..len).map(|_| rng.gen_range(0..2)).collect()).unwrap();
            let c = metrics::confusion(&seg, &gt).map_err(|e| e.to_string())?;
            check(
                c.total() == len as u64,
                format!("pair {i}: counts sum to {} not {len}", c.total()),
            )?;
            let sd = metrics::symmetric_difference(&c).map_err(|e| e.to_string())?;
            let ri = metrics::rand_index(&c).map_err(|e| e.to_string())?;
            check(
                ri == 1.0 - sd,
                format!("pair {i}: RI {ri} is not exactly 1 - SD with SD {sd}"),
            )?;
        }
        // ideal values on a self-comparison containing both classes
        let m = BinaryMask::new(6, 1, vec![1, 0, 1, 1, 0, 0]).unwrap();
        let c = metrics::confusion(&m, &m).map_err(|e| e.to_string())?;
        let r = metrics::MetricReport::from_confusion(&c).map_err(|e| e.to_string())?;
        check(r.sd_normalized == 0.0, "SD of seg = gt must be 0")?;
        check(r.sd_raw == 0, "raw SD of seg = gt must be 0")?;
        check(r.sen == Some(1.0), "SEN of seg = gt must be 1")?;
        check(r.spe == Some(1.0), "SPE of seg = gt must be 1")?;
        check(r.ppv == Some(1.0), "PPV of seg = gt must be 1")?;
        check(r.fscore == Some(1.0), "FSCORE of seg = gt must be 1")?;
        check(r.rand_index == 1.0, "RI of seg = gt must be 1")?;
        Ok(())
    };
    report(5, "metric identities on fuzzed masks", run());
}

#[test]
fn criterion_06_published_fscore_consistency() {
    let run = || -> Result<(), String> {
        let f = metrics::fscore(0.84, 0.98);
        let rounded = (f * 100.0).round() / 100.0;
        check(
            (rounded - 0.90).abs() < 1e-12 && (f - 0.90).abs() <= 0.005,
            format!("fscore(0.84, 0.98) = {f}"),
        )
    };
    report(6, "published SEN/PPV operating point rounds to 0.90", run());
}

#[test]
fn criterion_07_synthetic_end_to_end() {
    let run = || -> Result<(), String> {
        let start = Instant::now();
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        for (i, (img, gt)) in synth::disk_dataset(10, 256, 256, 7_000).iter().enumerate() {
            save_gray(img, dir.path().join(format!("disk-{i}.png"))).map_err(|e| e.to_string())?;
            save_mask(gt, dir.path().join(format!("disk-{i}_mask.png")))
                .map_err(|e| e.to_string())?;
        }
        let config = RunConfig::new(dir.path());
        let batch = run_batch(&config).map_err(|e| e.to_string())?;
        let best = batch
            .mean_rows
            .iter()
            .filter_map(|r| r.fscore.map(|f| (r.level, f, r.rand_index.unwrap_or(0.0))))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or("no level had a defined mean F-score")?;
        check(
            best.1 >= 0.95,
            format!(
                "best mean F-score {:.4} at level {} below 0.95",
                best.1, best.0
            ),
        )?;
        check(
            best.2 >= 0.95,
            format!("mean RI {:.4} at best level {} below 0.95", best.2, best.0),
        )?;
        let roc = emit_roc(&config).map_err(|e| e.to_string())?;
        let pooled = roc.pooled.ok_or("pooled ROC undefined")?;
        check(
            pooled.auc >= 0.98,
            format!("pooled AUC {:.4} below 0.98", pooled.auc),
        )?;
        within(start.elapsed(), Duration::from_secs(120))
    };
    report(7, "synthetic 10-image dataset meets F/RI/AUC floors", run());
}

#[test]
fn criterion_08_u2os_dataset_mode() {
    let run = || -> Result<Option<String>, String> {
        let dir = match std::env::var_os("U2OS_DIR") {
            Some(dir) => dir,
            None => return Ok(Some("U2OS_DIR not set".into())),
        };
        let mut config = RunConfig::new(std::path::PathBuf::from(dir));
        if let Some(suffix) = std::env::var_os("U2OS_MASK_SUFFIX") {
            config.mask_suffix = suffix.to_string_lossy().into_owned();
        }
        if let Some(glob) = std::env::var_os("U2OS_GLOB") {
            config.image_glob = glob.to_string_lossy().into_owned();
        }
        config.levels = vec![3];
        let batch = run_batch(&config).map_err(|e| e.to_string())?;
        let row = &batch.mean_rows[0];
        let ri = row.rand_index.ok_or("mean RI undefined")?;
        check(
            (0.93..=0.99).contains(&ri),
            format!("mean RI at level 3 is {ri:.4}, outside [0.93, 0.99]"),
        )?;
        config.levels = (0..8).collect();
        let roc = emit_roc(&config).map_err(|e| e.to_string())?;
        let auc = roc.pooled.ok_or("pooled ROC undefined")?.auc;
        check(
            (0.90..=0.97).contains(&auc),
            format!("pooled AUC {auc:.4} outside [0.90, 0.97]"),
        )?;
        Ok(None)
    };
    match run() {
        Ok(Some(reason)) => println!("[SKIP] criterion 8: U2OS dataset mode ({reason})"),
        outcome => report(8, "U2OS dataset mode", outcome.map(|_| ())),
    }
}

#[test]
fn criterion_09_batch_determinism() {
    let run = || -> Result<(), String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        for (i, (img, gt)) in synth::disk_dataset(3, 64, 64, 909).iter().enumerate() {
            save_gray(img, dir.path().join(format!("d{i}.png"))).map_err(|e| e.to_string())?;
            save_mask(gt, dir.path().join(format!("d{i}_mask.png"))).map_err(|e| e.to_string())?;
        }
        // simulated annealing exercises the seeded RNG path
        let mut config = RunConfig::new(dir.path());
        config.ensemble = EnsembleConfig {
            optimizer: Optimizer::Sa {
                t0: 2.0,
                cooling: 0.85,
                t_min: 0.1,
            },
            seed: 4242,
            ..EnsembleConfig::default()
        };
        let out_a = tempfile::tempdir().map_err(|e| e.to_string())?;
        let out_b = tempfile::tempdir().map_err(|e| e.to_string())?;
        write_batch_csvs(
            &run_batch(&config).map_err(|e| e.to_string())?,
            out_a.path(),
        )
        .map_err(|e| e.to_string())?;
        write_batch_csvs(
            &run_batch(&config).map_err(|e| e.to_string())?,
            out_b.path(),
        )
        .map_err(|e| e.to_string())?;
        for name in [
            "per_image.csv",
            "aggregate_mean.csv",
            "aggregate_pooled.csv",
        ] {
            let a = std::fs::read(out_a.path().join(name)).map_err(|e| e.to_string())?;
            let b = std::fs::read(out_b.path().join(name)).map_err(|e| e.to_string())?;
            check(a == b, format!("{name} differs between identical runs"))?;
        }
        Ok(())
    };
    report(9, "repeated batch runs emit byte-identical CSVs", run());
}

#[test]
fn criterion_10_threshold_nesting_and_roc_monotonicity() {
    let run = || -> Result<(), String> {
        let mut rng = ChaCha8Rng::seed_from_u64(1010);
        for i in 0..100 {
            let w = rng.gen_range(2..24);
            let h = rng.gen_range(2..24);
            let votes: Vec<u8> = (0..w * h).map(|_| rng.gen_range(0..=8)).collect();
            let map = ConfidenceMap::new(w, h, votes).unwrap();
            let mut prev: Option<BinaryMask> = None;
            for level in 0..8u8 {
                let mask = threshold_confidence(&map, level).map_err(|e| e.to_string())?;
                if let Some(prev) = &prev {
                    for (&hi, &lo) in mask.values().iter().zip(prev.values()) {
                        check(
                            hi <= lo,
                            format!(
                                "map {i}: level {level} mask not nested in level {}",
                                level - 1
                            ),
                        )?;
                    }
                }
                prev = Some(mask);
            }
            // ROC points derived from the nested masks must be monotone
            let mut gt: Vec<u8> = (0..w * h).map(|_| rng.gen_range(0..2)).collect();
            gt[0] = 0;
            gt[1] = 1;
            let gt = BinaryMask::new(w, h, gt).unwrap();
            let roc = metrics::roc_from_confidence(&map, &gt).map_err(|e| e.to_string())?;
            for pair in roc.level_points.windows(2) {
                check(
                    pair[1].tpr <= pair[0].tpr && pair[1].fpr <= pair[0].fpr,
                    format!("map {i}: ROC point not monotone between levels"),
                )?;
            }
        }
        Ok(())
    };
    report(
        10,
        "threshold masks nest and ROC points are monotone",
        run(),
    );
}
