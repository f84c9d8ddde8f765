use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wsrnet::channel::{place_coop_network, place_network, sample_channels};
use wsrnet::cplx::{dot_h, norm, norm_sqr};
use wsrnet::dataset::{build_header, Dataset};
use wsrnet::harness::{
    accuracy, generate_dataset, run_solver, score_model, train_model, with_jobs, ExperimentConfig,
    InstanceRun, Learned, NtSpec, Problems, Solver, Split,
};
use wsrnet::solvers::{
    coop_mrt_init, coop_pgp_solve, coop_wmmse_solve, iccd_solve, mrt_init, pgp_solve, upper_oracle,
    wmmse_solve, PgpOptions, StepRule, WmmseOptions,
};
use wsrnet::training::{align_ic_label, backward_ic, supervised_loss_ic, IcLoss};
use wsrnet::transform::{lift_coop, lift_ic, reduce_coop, reduce_ic};
use wsrnet::unfolded::{
    coop_rnn_pgp_forward, coop_rnn_pgp_forward_oracle, rnn_pgp_forward, rnn_pgp_forward_oracle,
    CoopRnnConfig, MlpParams, Model, RnnPgpConfig,
};
use wsrnet::wsr::{
    coop_wsr, gradient_coop, gradient_ic, phase_rotate, project_ball, project_coop, wsr,
};
use wsrnet::{
    CVec, ChannelOptions, ChannelSample, CoopReducedProblem, ReducedProblem, Scenario, C64,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rc(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(
        rng.random::<f64>() * 2.0 - 1.0,
        rng.random::<f64>() * 2.0 - 1.0,
    )
}

fn rvec(n: usize, rng: &mut ChaCha8Rng) -> CVec {
    (0..n).map(|_| rc(rng)).collect()
}

fn random_ic(k: usize, dim: usize, rng: &mut ChaCha8Rng) -> ReducedProblem {
    let g = (0..k)
        .map(|j| {
            (0..k)
                .map(|u| {
                    let s = if j == u { 1.0 } else { 0.5 };
                    rvec(dim, rng).into_iter().map(|z| z * s).collect()
                })
                .collect()
        })
        .collect();
    let alpha = (0..k).map(|_| 0.2 + rng.random::<f64>()).collect();
    let sigma2 = (0..k).map(|_| 0.05 + 0.2 * rng.random::<f64>()).collect();
    let power = (0..k).map(|_| 0.5 + 2.0 * rng.random::<f64>()).collect();
    ReducedProblem::from_channels(g, alpha, sigma2, power).unwrap()
}

fn random_coop(kt: usize, kr: usize, dim: usize, rng: &mut ChaCha8Rng) -> CoopReducedProblem {
    let g = (0..kt)
        .map(|_| (0..kr).map(|_| rvec(dim, rng)).collect())
        .collect();
    let alpha = (0..kr).map(|_| 0.2 + rng.random::<f64>()).collect();
    let sigma2 = (0..kr).map(|_| 0.05 + 0.2 * rng.random::<f64>()).collect();
    let power = (0..kt).map(|_| 0.5 + 2.0 * rng.random::<f64>()).collect();
    CoopReducedProblem::from_channels(g, alpha, sigma2, power).unwrap()
}

/// Random point inside each ball of radius `sqrt(power)`.
fn random_feasible(dims: &[usize], power: &[f64], rng: &mut ChaCha8Rng) -> Vec<CVec> {
    dims.iter()
        .zip(power)
        .map(|(&n, &pw)| {
            let v = rvec(n, rng);
            let s = pw.sqrt() * rng.random::<f64>() / norm(&v).max(1e-300);
            v.into_iter().map(|z| z * s).collect()
        })
        .collect()
}

fn network_sample(kt: usize, kr: usize, nt: usize, d: f64, seed: u64) -> ChannelSample {
    let geom = place_coop_network(kt, kr, d, seed).unwrap();
    sample_channels(&geom, &vec![nt; kt], seed + 1, &ChannelOptions::default()).unwrap()
}

fn ic_sample(k: usize, nt: usize, seed: u64) -> ChannelSample {
    let geom = place_network(k, 0.5, seed).unwrap();
    sample_channels(&geom, &vec![nt; k], seed + 1, &ChannelOptions::default()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Largest central-difference mismatch over every real coordinate of `w`,
/// relative to the largest gradient entry.
fn fd_error(w: &[CVec], grad: &[CVec], f: impl Fn(&[CVec]) -> f64) -> f64 {
    let scale = grad
        .iter()
        .flatten()
        .fold(0.0f64, |m, z| m.max(z.re.abs()).max(z.im.abs()))
        .max(1e-12);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for k in 0..w.len() {
        for i in 0..w[k].len() {
            for part in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let mut plus = w.to_vec();
                plus[k][i] += part * h;
                let mut minus = w.to_vec();
                minus[k][i] -= part * h;
                let fd = (f(&plus) - f(&minus)) / (2.0 * h);
                let an = if part.re == 1.0 {
                    grad[k][i].re
                } else {
                    grad[k][i].im
                };
                worst = worst.max((fd - an).abs() / scale);
            }
        }
    }
    worst
}

fn flatten_coop(w: &[Vec<CVec>]) -> Vec<CVec> {
    w.to_vec().into_iter().flatten().collect()
}

fn unflatten_coop(flat: &[CVec], kr: usize) -> Vec<Vec<CVec>> {
    flat.chunks(kr).map(|c| c.to_vec()).collect()
}

fn coop_gradient_error(rng: &mut ChaCha8Rng, n: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..n {
        let kt = 1 + i % 4;
        let kr = 1 + (i / 4) % 4;
        let dim = 1 + (i / 16) % 4;
        let p = random_coop(kt, kr, dim, rng);
        let w: Vec<Vec<CVec>> = (0..kt)
            .map(|j| random_feasible(&vec![dim; kr], &vec![p.power[j] / kr as f64; kr], rng))
            .collect();
        let g = gradient_coop(&w, &p);
        let err = fd_error(&flatten_coop(&w), &flatten_coop(&g), |x| {
            coop_wsr(&unflatten_coop(x, kr), &p)
        });
        worst = worst.max(err);
    }
    worst
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut ic = 0.0f64;
    for i in 0..100 {
        let k = 1 + i % 4;
        let dim = 1 + (i / 4) % 4;
        let p = random_ic(k, dim, &mut rng);
        let w = random_feasible(&vec![dim; k], &p.power, &mut rng);
        let g = gradient_ic(&w, &p);
        ic = ic.max(fd_error(&w, &g, |x| wsr(x, &p)));
    }
    let coop = coop_gradient_error(&mut rng, 100);
    check(
        ic < 1e-6 && coop < 1e-6,
        format!("max relative error {ic:.2e} (interference channel), {coop:.2e} (cooperative) over 100 instances each"),
    )
}

fn criterion_2() -> Outcome {
    let mut lift_err = 0.0f64;
    let mut trace_err = 0.0f64;
    for i in 0..100u64 {
        let k = 1 + (i as usize % 6);
        let nt = 1 + (i as usize * 7 % 12);
        let s = ic_sample(k, nt, 1000 + i);
        let p = reduce_ic(&s).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(i);
        let dims: Vec<usize> = (0..k).map(|b| p.dim(b)).collect();
        let w = random_feasible(&dims, &p.power, &mut rng);
        let v = lift_ic(&p, &w).map_err(|e| e.to_string())?;
        lift_err = lift_err.max(rel(wsr(&v, &s), wsr(&w, &p)));

        let init = mrt_init(&p);
        let opts = PgpOptions {
            iterations: 30,
            ..Default::default()
        };
        let a = pgp_solve(&p, &init, &opts).map_err(|e| e.to_string())?;
        let b = pgp_solve(&s, &lift_ic(&p, &init).unwrap(), &opts).map_err(|e| e.to_string())?;
        if a.wsr.len() != b.wsr.len() {
            return Err(format!(
                "instance {i}: trace lengths {} vs {}",
                a.wsr.len(),
                b.wsr.len()
            ));
        }
        for (x, y) in a.wsr.iter().zip(&b.wsr) {
            trace_err = trace_err.max(rel(*y, *x));
        }
    }
    check(
        lift_err < 1e-8 && trace_err < 1e-6,
        format!("lifted WSR error {lift_err:.2e}, full vs reduced PGP trace error {trace_err:.2e} over 100 instances"),
    )
}

fn criterion_3() -> Outcome {
    let mut worst_drop = 0.0f64;
    let mut worst_power = 0.0f64;
    for i in 0..200u64 {
        let k = 2 + (i as usize % 7);
        let nt = 2 + (i as usize / 7 % 7);
        let p = reduce_ic(&ic_sample(k, nt, 5000 + i)).map_err(|e| e.to_string())?;
        let t = wmmse_solve(
            &p,
            &mrt_init(&p),
            &WmmseOptions {
                iterations: 100,
                record_beamformers: true,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        for win in t.wsr.windows(2) {
            worst_drop = worst_drop.max(win[0] - win[1]);
        }
        for w in t.beamformers.as_ref().unwrap() {
            for (b, wb) in w.iter().enumerate() {
                worst_power = worst_power.max(norm_sqr(wb) / p.power[b] - 1.0);
            }
        }
    }
    check(
        worst_drop <= 1e-9 && worst_power <= 1e-6,
        format!("largest WSR decrease {worst_drop:.2e}, largest relative power excess {worst_power:.2e} over 200 instances"),
    )
}

/// Grid optimum of a two-link problem with reduced dimension at most two.
///
/// Each beam is searched over unit directions `(cos θ, sin θ e^{iφ})` on a
/// 200 × 64 grid, scaled to full power. For each of 200 interference levels
/// β the largest desired power with at most β leaked interference is kept
/// (shrinking the beam when needed), and the two tables are combined
/// exhaustively.
fn grid_optimum(p: &ReducedProblem) -> f64 {
    const LEVELS: usize = 200;
    const ANGLES: usize = 200;
    const PHASES: usize = 64;
    let tables: Vec<(Vec<f64>, Vec<f64>)> = (0..2)
        .map(|k| {
            let other = 1 - k;
            let own = &p.g[k][k];
            let leak = &p.g[k][other];
            let dim = own.len();
            let mut cands = Vec::new();
            let scale = p.power[k].sqrt();
            if dim == 1 {
                cands.push(vec![C64::new(scale, 0.0)]);
            } else {
                for a in 0..ANGLES {
                    let th = 0.5 * PI * a as f64 / (ANGLES - 1) as f64;
                    for f in 0..PHASES {
                        let ph = 2.0 * PI * f as f64 / PHASES as f64;
                        cands.push(vec![
                            C64::new(th.cos() * scale, 0.0),
                            C64::from_polar(th.sin() * scale, ph),
                        ]);
                    }
                }
            }
            let ab: Vec<(f64, f64)> = cands
                .iter()
                .map(|w| (dot_h(own, w).norm_sqr(), dot_h(leak, w).norm_sqr()))
                .collect();
            let b_max = ab.iter().fold(0.0f64, |m, x| m.max(x.1));
            let betas: Vec<f64> = (0..LEVELS)
                .map(|i| b_max * (i as f64 / (LEVELS - 1) as f64).powi(2))
                .collect();
            let best: Vec<f64> = betas
                .iter()
                .map(|&beta| {
                    ab.iter()
                        .map(|&(a, b)| if b <= beta { a } else { a * beta / b })
                        .fold(0.0, f64::max)
                })
                .collect();
            (betas, best)
        })
        .collect();
    let mut opt = 0.0f64;
    for (b0, a0) in tables[0].0.iter().zip(&tables[0].1) {
        for (b1, a1) in tables[1].0.iter().zip(&tables[1].1) {
            let r0 = p.alpha[0] * (1.0 + a0 / (b1 + p.sigma2[0])).log2();
            let r1 = p.alpha[1] * (1.0 + a1 / (b0 + p.sigma2[1])).log2();
            opt = opt.max(r0 + r1);
        }
    }
    opt
}

fn criterion_4() -> Outcome {
    let mut sums = [0.0f64; 3];
    let mut wmmse_min = f64::INFINITY;
    let mut oracle_min = f64::INFINITY;
    for i in 0..50u64 {
        let nt = 1 + (i as usize % 2);
        let geom = place_network(2, 1.0, 9000 + i).unwrap();
        let s = sample_channels(&geom, &[nt, nt], 9100 + i, &ChannelOptions::default()).unwrap();
        let p = reduce_ic(&s).map_err(|e| e.to_string())?;
        let grid = grid_optimum(&p);
        let w = wmmse_solve(&p, &mrt_init(&p), &WmmseOptions::default())
            .map_err(|e| e.to_string())?
            .final_wsr();
        let o = upper_oracle(&p, 8, 200, i).map_err(|e| e.to_string())?.wsr;
        sums[0] += grid;
        sums[1] += w;
        sums[2] += o;
        wmmse_min = wmmse_min.min(w / grid);
        oracle_min = oracle_min.min(o / grid);
    }
    let (wmmse, oracle) = (sums[1] / sums[0], sums[2] / sums[0]);
    check(
        wmmse >= 0.95 && oracle >= 0.98,
        format!(
            "share of the grid-optimal WSR over 50 instances: WMMSE {:.2}%, 8-restart oracle {:.2}% (worst single instance {:.2}% / {:.2}%)",
            100.0 * wmmse,
            100.0 * oracle,
            100.0 * wmmse_min,
            100.0 * oracle_min
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..10u64 {
        let mut s = ic_sample(1, 1 + i as usize % 6, 300 + i);
        s.alpha = vec![1.0];
        let p = reduce_ic(&s).map_err(|e| e.to_string())?;
        let closed = (1.0 + p.power[0] * norm_sqr(&p.g[0][0]) / p.sigma2[0]).log2();
        let init = mrt_init(&p);
        let e = |x: wsrnet::Result<f64>| x.map_err(|e| e.to_string());
        let cfg = RnnPgpConfig {
            t: 10,
            c: 0,
            hidden: vec![8],
            ..Default::default()
        };
        let zero = MlpParams::zeros(&cfg.layer_sizes()).unwrap();
        let got = [
            e(pgp_solve(&p, &init, &Default::default()).map(|t| t.final_wsr()))?,
            e(iccd_solve(&p, &init, &Default::default()).map(|t| t.final_wsr()))?,
            e(wmmse_solve(&p, &init, &Default::default()).map(|t| t.final_wsr()))?,
            e(upper_oracle(&p, 8, 100, i).map(|o| o.wsr))?,
            e(rnn_pgp_forward(&p, &zero, &cfg, &init).map(|o| *o.wsr.last().unwrap()))?,
        ];
        for g in got {
            worst = worst.max(rel(g, closed));
        }
    }
    check(
        worst < 1e-4,
        format!("largest relative gap to log2(1 + P|g|^2/sigma^2): {worst:.2e} (pgp, iccd, wmmse, oracle, zero-parameter rnn-pgp)"),
    )
}

fn criterion_6() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..20u64 {
        let p = reduce_ic(&ic_sample(7, 8, 700 + i)).map_err(|e| e.to_string())?;
        let init = mrt_init(&p);
        let g0 = gradient_ic(&init, &p);
        let gnorm = g0.iter().map(|v| norm_sqr(v)).sum::<f64>().sqrt();
        let step = 0.05 * p.power[0].sqrt() / gnorm;
        let cfg = RnnPgpConfig {
            t: 20,
            c: 6,
            ..Default::default()
        };
        let out = rnn_pgp_forward_oracle(&p, &cfg, &init, step).map_err(|e| e.to_string())?;
        let t = pgp_solve(
            &p,
            &init,
            &PgpOptions {
                iterations: 20,
                step: StepRule::Constant(step),
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        for (a, b) in out.wsr.iter().zip(&t.wsr) {
            worst = worst.max(rel(*a, *b));
        }
    }
    check(
        worst < 1e-9,
        format!("largest relative trace difference {worst:.2e} over 20 instances, T = 20"),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let p = random_ic(2, 2, &mut rng);
    let cfg = RnnPgpConfig {
        t: 2,
        c: 1,
        eta: 1e-3,
        hidden: vec![8],
        stepsize_only: false,
    };
    let params = MlpParams::init(&cfg.layer_sizes(), 7, 0.3).unwrap();
    let init = mrt_init(&p);
    let label = align_ic_label(
        &p,
        &wmmse_solve(&p, &init, &Default::default()).unwrap().final_w,
    );
    let gamma = 0.95;
    let g = backward_ic(
        &p,
        &params,
        &cfg,
        &init,
        IcLoss::Supervised {
            label: &label,
            gamma,
        },
    )
    .map_err(|e| e.to_string())?;
    let loss = |m: &MlpParams| {
        let out = rnn_pgp_forward(&p, m, &cfg, &init).unwrap();
        supervised_loss_ic(&out.iterates, &label, &p.alpha, gamma).unwrap()
    };
    let flat = params.to_flat();
    let grad = g.grad.to_flat();
    let scale = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let h = 1e-5;
    let mut agree = 0;
    for i in 0..flat.len() {
        let mut plus = flat.clone();
        plus[i] += h;
        let mut minus = flat.clone();
        minus[i] -= h;
        let fp = loss(&MlpParams::from_flat(&params.layer_sizes, &plus).unwrap());
        let fm = loss(&MlpParams::from_flat(&params.layer_sizes, &minus).unwrap());
        let fd = (fp - fm) / (2.0 * h);
        if (fd - grad[i]).abs() <= 1e-5 * fd.abs().max(grad[i].abs()).max(1e-6 * scale) {
            agree += 1;
        }
    }
    let frac = agree as f64 / flat.len() as f64;
    check(
        frac >= 0.95,
        format!(
            "{agree} of {} parameters within 1e-5 relative ({:.1}%)",
            flat.len(),
            100.0 * frac
        ),
    )
}

/// Model trained once at desk scale and shared by criteria 8 to 10.
struct Desk {
    cfg: ExperimentConfig,
    model: Model,
    test: Problems,
    accuracy: f64,
    train_s: f64,
}

fn test_set(cfg: &ExperimentConfig) -> wsrnet::Result<Problems> {
    let mut c = cfg.clone();
    c.label_solver = None;
    let (_, records) = generate_dataset(&c, Split::Test)?;
    Problems::from_records(c.scenario, &records)
}

fn train_set(cfg: &ExperimentConfig) -> wsrnet::Result<Dataset> {
    let (meta, records) = generate_dataset(cfg, Split::Train)?;
    Ok(Dataset {
        header: build_header(&meta, &records)?,
        records,
    })
}

fn desk() -> wsrnet::Result<Desk> {
    let cfg = ExperimentConfig::default();
    let start = Instant::now();
    let ds = train_set(&cfg)?;
    let (model, _) = train_model(&ds, &cfg)?;
    let test = test_set(&cfg)?;
    let (rows, _) = score_model(&test, &model, &cfg)?;
    Ok(Desk {
        accuracy: rows[0].accuracy,
        train_s: start.elapsed().as_secs_f64(),
        cfg,
        model,
        test,
    })
}

fn criterion_8(d: &Desk) -> Outcome {
    check(
        d.accuracy >= 90.0 && d.train_s < 1800.0,
        format!(
            "K = 7, Nt = 8, c = 6, T = 10, L = 2000: {:.2}% of WMMSE on {} held-out samples ({:.0} s for data, training and scoring)",
            d.accuracy,
            d.test.len(),
            d.train_s
        ),
    )
}

fn criterion_9(d: &Desk) -> Outcome {
    let start = Instant::now();
    let mut nt16 = d.cfg.clone();
    nt16.nt = NtSpec::Fixed(16);
    let a16 = score_model(
        &test_set(&nt16).map_err(|e| e.to_string())?,
        &d.model,
        &nt16,
    )
    .map_err(|e| e.to_string())?
    .0[0]
        .accuracy;
    let mut k13 = d.cfg.clone();
    k13.k = 13;
    let a13 = score_model(&test_set(&k13).map_err(|e| e.to_string())?, &d.model, &k13)
        .map_err(|e| e.to_string())?
        .0[0]
        .accuracy;
    let drop = d.accuracy - a16;
    check(
        drop <= 5.0 && a13 >= 80.0 && start.elapsed().as_secs_f64() < 600.0,
        format!(
            "Nt = 16: {a16:.2}% (drop {drop:.2} points); K = 13: {a13:.2}% ({:.0} s)",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn criterion_10(d: &Desk) -> Outcome {
    let median_time = |solver: Solver| -> wsrnet::Result<f64> {
        let learned = Learned {
            model: &d.model,
            t: Some(10),
        };
        let runs = with_jobs(Some(1), || {
            run_solver(&d.test, solver, 10, &d.cfg, Some(learned))
        })?;
        Ok(wsrnet::harness::median(
            &runs.iter().map(InstanceRun::runtime_s).collect::<Vec<_>>(),
        ))
    };
    let rnn = median_time(Solver::RnnPgp).map_err(|e| e.to_string())?;
    let wm = median_time(Solver::Wmmse).map_err(|e| e.to_string())?;
    let ratio = wm / rnn;
    check(
        ratio >= 3.0,
        format!(
            "median per-instance time at T = 10, one thread: rnn-pgp {:.3} ms, wmmse {:.3} ms ({ratio:.2}x)",
            1e3 * rnn,
            1e3 * wm
        ),
    )
}

fn permuted(p: &ReducedProblem, perm: &[usize]) -> ReducedProblem {
    let k = perm.len();
    let mut g = vec![vec![CVec::new(); k]; k];
    for j in 0..k {
        for u in 0..k {
            g[perm[j]][perm[u]] = p.g[j][u].clone();
        }
    }
    let mut alpha = vec![0.0; k];
    let mut sigma2 = vec![0.0; k];
    let mut power = vec![0.0; k];
    for j in 0..k {
        alpha[perm[j]] = p.alpha[j];
        sigma2[perm[j]] = p.sigma2[j];
        power[perm[j]] = p.power[j];
    }
    ReducedProblem::from_channels(g, alpha, sigma2, power).unwrap()
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut failures = Vec::new();

    let mut phase = 0.0f64;
    for _ in 0..50 {
        let p = random_ic(4, 3, &mut rng);
        let w = random_feasible(&[3; 4], &p.power, &mut rng);
        let rot: Vec<CVec> = w
            .iter()
            .map(|v| {
                let e = C64::from_polar(1.0, 2.0 * PI * rng.random::<f64>());
                v.iter().map(|z| z * e).collect()
            })
            .collect();
        phase = phase.max(rel(wsr(&rot, &p), wsr(&w, &p)));
        let q = random_coop(3, 3, 3, &mut rng);
        let wc: Vec<Vec<CVec>> = (0..3)
            .map(|j| random_feasible(&[3; 3], &[q.power[j] / 3.0; 3], &mut rng))
            .collect();
        let psi: Vec<C64> = (0..3)
            .map(|_| C64::from_polar(1.0, 2.0 * PI * rng.random::<f64>()))
            .collect();
        let rc: Vec<Vec<CVec>> = wc
            .iter()
            .map(|bs| {
                bs.iter()
                    .zip(&psi)
                    .map(|(v, e)| v.iter().map(|z| z * e).collect())
                    .collect()
            })
            .collect();
        phase = phase.max(rel(coop_wsr(&rc, &q), coop_wsr(&wc, &q)));
    }
    if phase > 1e-12 {
        failures.push(format!("phase invariance {phase:.1e}"));
    }

    let mut proj = 0.0f64;
    for _ in 0..200 {
        let n = 1 + rng.random_range(0..6);
        let pw = 0.1 + 3.0 * rng.random::<f64>();
        let s = 3.0 * rng.random::<f64>();
        let x: CVec = rvec(n, &mut rng).into_iter().map(|z| z * s).collect();
        let y: CVec = rvec(n, &mut rng).into_iter().map(|z| z * s).collect();
        let px = project_ball(&x, pw);
        let py = project_ball(&y, pw);
        let dist = |a: &[C64], b: &[C64]| -> f64 {
            a.iter()
                .zip(b)
                .map(|(u, v)| (u - v).norm_sqr())
                .sum::<f64>()
                .sqrt()
        };
        proj = proj.max(dist(&project_ball(&px, pw), &px));
        proj = proj.max(dist(&px, &py) - dist(&x, &y));
        let xs: Vec<CVec> = (0..3).map(|_| x.clone()).collect();
        let ys: Vec<CVec> = (0..3).map(|_| y.clone()).collect();
        let pxs = project_coop(&xs, pw);
        let pys = project_coop(&ys, pw);
        let cdist = |a: &[CVec], b: &[CVec]| -> f64 {
            a.iter()
                .zip(b)
                .flat_map(|(u, v)| u.iter().zip(v).map(|(p, q)| (p - q).norm_sqr()))
                .sum::<f64>()
                .sqrt()
        };
        proj = proj.max(cdist(&project_coop(&pxs, pw), &pxs));
        proj = proj.max(cdist(&pxs, &pys) - cdist(&xs, &ys));
    }
    if proj > 1e-12 {
        failures.push(format!(
            "projection idempotence / non-expansiveness {proj:.1e}"
        ));
    }

    let mut align = 0.0f64;
    for _ in 0..200 {
        let n = 1 + rng.random_range(0..6);
        let w = rvec(n, &mut rng);
        let g = rvec(n, &mut rng);
        let r = phase_rotate(&w, &g);
        let rho = dot_h(&g, &r);
        align = align.max(rel(norm(&r), norm(&w)));
        align = align.max(rho.im.abs() / rho.norm().max(1e-300));
        if rho.re < 0.0 {
            align = f64::INFINITY;
        }
    }
    if align > 1e-12 {
        failures.push(format!("rotation alignment {align:.1e}"));
    }

    let cfg = RnnPgpConfig {
        t: 6,
        c: 3,
        ..Default::default()
    };
    let params = MlpParams::init(&cfg.layer_sizes(), 3, 1.0).unwrap();
    let mut equiv = 0.0f64;
    let mut forward = 0.0f64;
    for i in 0..20u64 {
        let p = reduce_ic(&ic_sample(5, 6, 1200 + i)).map_err(|e| e.to_string())?;
        let mut perm: Vec<usize> = (0..5).collect();
        for j in (1..5).rev() {
            perm.swap(j, rng.random_range(0..=j));
        }
        let q = permuted(&p, &perm);
        let init = mrt_init(&p);
        let out = rnn_pgp_forward(&p, &params, &cfg, &init).map_err(|e| e.to_string())?;
        let mut init_q = vec![CVec::new(); 5];
        for j in 0..5 {
            init_q[perm[j]] = init[j].clone();
        }
        let out_q = rnn_pgp_forward(&q, &params, &cfg, &init_q).map_err(|e| e.to_string())?;
        for j in 0..5 {
            let a = &out.w[j];
            let b = &out_q.w[perm[j]];
            let diff = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            equiv = equiv.max(diff / p.power[j].sqrt());
        }
        for w in &out.iterates[1..] {
            for (b, wb) in w.iter().enumerate() {
                forward = forward.max(norm_sqr(wb) / p.power[b] - 1.0);
                let rho = dot_h(&p.g[b][b], wb);
                forward = forward.max(rho.im.abs() / rho.norm().max(1e-300));
                if rho.re < -1e-9 * rho.norm() {
                    forward = f64::INFINITY;
                }
            }
        }
    }
    if equiv > 1e-9 {
        failures.push(format!("permutation equivariance {equiv:.1e}"));
    }
    if forward > 1e-9 {
        failures.push(format!("forward feasibility / alignment {forward:.1e}"));
    }

    let detail = format!(
        "phase {phase:.1e}, projection {proj:.1e}, rotation {align:.1e}, permutation {equiv:.1e}, forward feasibility/alignment {forward:.1e}"
    );
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; failing: {}", failures.join(", ")))
    }
}

fn coop_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1212);
    let grad = coop_gradient_error(&mut rng, 100);

    let mut drop = 0.0f64;
    let mut excess = 0.0f64;
    for i in 0..100u64 {
        let kt = 1 + i as usize % 4;
        let kr = 1 + (i as usize / 4) % 4;
        let s = network_sample(kt, kr, 2 + i as usize % 6, 0.5, 2000 + i);
        let p = reduce_coop(&s).map_err(|e| e.to_string())?;
        let init = coop_mrt_init(&p);
        let t = coop_wmmse_solve(
            &p,
            &init,
            &WmmseOptions {
                iterations: 60,
                record_beamformers: true,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let g = coop_pgp_solve(
            &p,
            &init,
            &PgpOptions {
                iterations: 60,
                record_beamformers: true,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        for win in t.wsr.windows(2).chain(g.wsr.windows(2)) {
            drop = drop.max(win[0] - win[1]);
        }
        for w in t
            .beamformers
            .iter()
            .flatten()
            .chain(g.beamformers.iter().flatten())
        {
            for (j, bs) in w.iter().enumerate() {
                let used: f64 = bs.iter().map(|v| norm_sqr(v)).sum();
                excess = excess.max(used / p.power[j] - 1.0);
            }
        }
        let v = lift_coop(&p, &g.final_w).map_err(|e| e.to_string())?;
        drop = drop.max(rel(coop_wsr(&v, &s), g.final_wsr()) - 1e-8);
    }

    let mut single = 0.0f64;
    for i in 0..10u64 {
        let mut s = network_sample(1, 1, 1 + i as usize % 6, 0.5, 3000 + i);
        s.alpha = vec![1.0];
        let p = reduce_coop(&s).map_err(|e| e.to_string())?;
        let closed = (1.0 + p.power[0] * norm_sqr(&p.g[0][0]) / p.sigma2[0]).log2();
        let init = coop_mrt_init(&p);
        let cfg = CoopRnnConfig::new(10, 1);
        let zero = MlpParams::zeros(&cfg.layer_sizes()).unwrap();
        let got = [
            coop_pgp_solve(&p, &init, &Default::default())
                .map_err(|e| e.to_string())?
                .final_wsr(),
            coop_wmmse_solve(&p, &init, &Default::default())
                .map_err(|e| e.to_string())?
                .final_wsr(),
            *coop_rnn_pgp_forward(&p, &zero, &cfg, &init)
                .map_err(|e| e.to_string())?
                .wsr
                .last()
                .unwrap(),
        ];
        for g in got {
            single = single.max(rel(g, closed));
        }
    }

    let mut fidelity = 0.0f64;
    for i in 0..20u64 {
        let p = reduce_coop(&network_sample(3, 3, 8, 1.0, 4000 + i)).map_err(|e| e.to_string())?;
        let init = coop_mrt_init(&p);
        let g0 = gradient_coop(&init, &p);
        let gnorm = g0.iter().flatten().map(|v| norm_sqr(v)).sum::<f64>().sqrt();
        let step = 0.05 * p.power[0].sqrt() / gnorm;
        let cfg = CoopRnnConfig::new(20, 3);
        let out = coop_rnn_pgp_forward_oracle(&p, &cfg, &init, step).map_err(|e| e.to_string())?;
        let t = coop_pgp_solve(
            &p,
            &init,
            &PgpOptions {
                iterations: 20,
                step: StepRule::Constant(step),
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        for (a, b) in out.wsr.iter().zip(&t.wsr) {
            fidelity = fidelity.max(rel(*a, *b));
        }
    }

    let detail = format!(
        "gradient {grad:.1e}, monotonicity/lift {drop:.1e}, per-BS power excess {excess:.1e}, single pair {single:.1e}, oracle fidelity {fidelity:.1e}"
    );
    check(
        grad < 1e-6 && drop <= 1e-9 && excess <= 1e-6 && single < 1e-4 && fidelity < 1e-9,
        detail,
    )
}

fn coop_training() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        scenario: Scenario::Coop,
        k_t: 3,
        k_r: 3,
        ..Default::default()
    };
    let run = || -> wsrnet::Result<(f64, usize)> {
        let ds = train_set(&cfg)?;
        let (model, _) = train_model(&ds, &cfg)?;
        let test = test_set(&cfg)?;
        let learned = Learned {
            model: &model,
            t: Some(10),
        };
        let rnn = run_solver(&test, Solver::RnnPgp, 10, &cfg, Some(learned))?;
        let pgp = run_solver(&test, Solver::Pgp, 500, &cfg, None)?;
        let finals = |r: &[InstanceRun]| r.iter().map(InstanceRun::final_wsr).collect::<Vec<_>>();
        Ok((accuracy(&finals(&rnn), &finals(&pgp)), test.len()))
    };
    let (acc, n) = run().map_err(|e| e.to_string())?;
    check(
        acc >= 85.0,
        format!(
            "K_t = K_r = 3, Nt = 8, T = 10, L = 2000: {acc:.2}% of 500-iteration PGP on {n} held-out samples ({:.0} s)",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn criterion_12() -> Outcome {
    let a = coop_checks();
    let b = coop_training();
    let text = |r: &Outcome| match r {
        Ok(s) | Err(s) => s.clone(),
    };
    let detail = format!("{}; {}", text(&a), text(&b));
    check(a.is_ok() && b.is_ok(), detail)
}

const NAMES: [&str; 12] = [
    "gradient correctness",
    "transform equivalence",
    "WMMSE monotonicity and feasibility",
    "small-instance optimality",
    "single-link closed form",
    "unfolding fidelity",
    "training gradient exactness",
    "learned performance",
    "generalization",
    "runtime ordering",
    "invariance suite",
    "cooperative pipeline",
];

fn main() {
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .filter(|n| (1..=12).contains(n))
        .collect();
    let wanted = |n: usize| selected.is_empty() || selected.contains(&n);
    let mut desk_model: Option<Result<Desk, String>> = None;
    let mut failed = 0;
    for n in 1..=12 {
        if !wanted(n) {
            continue;
        }
        let start = Instant::now();
        let outcome = match n {
            1 => criterion_1(),
            2 => criterion_2(),
            3 => criterion_3(),
            4 => criterion_4(),
            5 => criterion_5(),
            6 => criterion_6(),
            7 => criterion_7(),
            8..=10 => {
                let d = desk_model.get_or_insert_with(|| desk().map_err(|e| e.to_string()));
                match d {
                    Err(e) => Err(format!("desk-scale training failed: {e}")),
                    Ok(d) => match n {
                        8 => criterion_8(d),
                        9 => criterion_9(d),
                        _ => criterion_10(d),
                    },
                }
            }
            11 => criterion_11(),
            _ => criterion_12(),
        };
        let secs = start.elapsed().as_secs_f64();
        let (status, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {n:2} {status}  {}: {detail} [{secs:.1} s]",
            NAMES[n - 1]
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
