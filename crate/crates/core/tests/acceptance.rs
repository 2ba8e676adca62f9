//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use num_complex::Complex64;
use pinching_cr::baselines::{fpa_st_beamformer, Beamformer};
use pinching_cr::channel_mc::{chunk_rng, complex_gaussian, mc_ase, mc_psi};
use pinching_cr::cli::parse_and_dispatch;
use pinching_cr::experiments::{random_user_drop, sweep, Algorithm, SweepSpec, SweepTable};
use pinching_cr::model::lateral_offset_sq;
use pinching_cr::optimizer::{
    b_increment, candidate_step, coarse_placement, phase_pair_search, power_control, refine_layout,
    PhaseSearchResult,
};
use pinching_cr::{psi, three_stage, OddSchemeMode, PinchLayout, Role, SystemConfig, Vec3};
use rand::Rng;

const MC_SAMPLES: usize = 100_000;
const PSI_SIGMA: f64 = 3.0;
const PSI_MIN_AGREE: usize = 18;
const PSI_BUDGET_S: f64 = 60.0;
const SUM_SE_REL_TOL: f64 = 0.05;
const PHASOR_TOL: f64 = 1e-10;
const COARSE_REL_TOL: f64 = 1e-12;
const ALIGN_TOL_RAD: f64 = 0.05;
const QCQP_OBJ_REL_TOL: f64 = 1e-6;
const QCQP_FEAS_TOL: f64 = 1e-9;
const SIZE_GROWTH_MAX: f64 = 2.5;
const K_GROWTH_MAX: f64 = 5.0;
const TREND_DROPS: usize = 100;
const TREND_SEED: u64 = 7;

const PU: Vec3 = Vec3::new(7.5, -5.0, 0.0);
const SU: Vec3 = Vec3::new(7.5, 5.0, 0.0);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn random_user(rng: &mut impl Rng, role: Role, c: &SystemConfig) -> Vec3 {
    Vec3::new(
        rng.random::<f64>() * c.waveguide_length,
        c.waveguide_y(role) + (rng.random::<f64>() - 0.5) * 10.0,
        0.0,
    )
}

fn c1_psi_monte_carlo() -> Outcome {
    let start = Instant::now();
    let mut rng = chunk_rng(101, 0);
    let kappas = [0.0, 1.0, 4.0, 20.0];
    let mut agree = 0;
    let mut worst = 0.0f64;
    for case in 0..20 {
        let mut c = SystemConfig::default();
        c.ricean_factor = kappas[case % 4];
        let n = rng.random_range(1..=6);
        c.pa_count_primary = n;
        let xs = (0..n).map(|_| rng.random::<f64>() * c.waveguide_length).collect();
        let layout = PinchLayout::new(Role::Primary, xs);
        let user = random_user(&mut rng, Role::Primary, &c);
        let exact = psi(&layout, &user, &c).unwrap();
        let est = mc_psi(&layout, &user, &c, MC_SAMPLES, 1000 + case as u64).unwrap();
        let z = (est.mean - exact).abs() / est.std_error;
        worst = worst.max(z);
        if z <= PSI_SIGMA {
            agree += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        agree >= PSI_MIN_AGREE && secs <= PSI_BUDGET_S,
        format!("{agree}/20 within {PSI_SIGMA} se (worst {worst:.2} se), {secs:.1} s"),
    )
}

fn c2_sum_se_approximation() -> Outcome {
    let c = SystemConfig::default();
    let sol = three_stage(&PU, &SU, &c, OddSchemeMode::default()).unwrap();
    let mc = mc_ase(&sol.layout_pt, &sol.layout_st, sol.p_st, &PU, &SU, &c, MC_SAMPLES, 202).unwrap();
    let gap = (sol.report.sum_se - mc.sum.mean).abs() / mc.sum.mean;
    outcome(
        gap <= SUM_SE_REL_TOL,
        format!("closed {:.5}, mc {:.5}, relative gap {gap:.5}", sol.report.sum_se, mc.sum.mean),
    )
}

fn c3_phasor_identities() -> Outcome {
    let mut worst_zero = 0.0f64;
    let mut worst_closed = 0.0f64;
    for n in 2..=16usize {
        let sum = |theta: f64| -> f64 {
            let phases: Vec<f64> = (0..n).map(|i| i as f64 * theta).collect();
            pinching_cr::phasor::residual_phasor_sum(&phases).unwrap().0
        };
        for k in 1..n {
            worst_zero = worst_zero.max(sum(2.0 * PI * k as f64 / n as f64));
        }
        for i in 0..1000 {
            let theta = 2.0 * PI * (i as f64 + 0.5) / 1000.0;
            let closed = ((n as f64 * theta / 2.0).sin() / (theta / 2.0).sin()).abs();
            worst_closed = worst_closed.max((sum(theta) - closed).abs());
        }
    }
    outcome(
        worst_zero <= PHASOR_TOL && worst_closed <= PHASOR_TOL,
        format!("max |sum| at roots {worst_zero:.2e}, max closed-form error {worst_closed:.2e}"),
    )
}

fn c4_coarse_optimality() -> Outcome {
    let c = SystemConfig::default();
    let k = c.constants().unwrap();
    let mut worst = f64::NEG_INFINITY;
    let mut cases = 0;
    for count in 1..=8usize {
        for &(target, y) in &[(7.5, -5.0), (3.2, -9.0), (11.9, -2.5)] {
            let user = Vec3::new(target, y, 0.0);
            let cc = lateral_offset_sq(&user, Role::Primary, &c);
            let objective = |x1: f64| -> f64 {
                (0..count)
                    .map(|n| ((x1 + n as f64 * k.min_spacing - target).powi(2) + cc).powf(c.pathloss_exponent / 4.0))
                    .sum()
            };
            let layout = coarse_placement(target, count, Role::Primary, &c).unwrap();
            let base = objective(layout.xs[0]);
            for j in 1..=200 {
                for sign in [-1.0, 1.0] {
                    let x1 = layout.xs[0] + sign * j as f64 * k.wavelength / 20.0;
                    let x_last = x1 + (count - 1) as f64 * k.min_spacing;
                    if x1 < 0.0 || x_last > c.waveguide_length {
                        continue;
                    }
                    worst = worst.max((base - objective(x1)) / base);
                }
            }
            cases += 1;
        }
    }
    outcome(
        worst <= COARSE_REL_TOL,
        format!("{cases} layouts, best relative improvement from perturbation {worst:.2e}"),
    )
}

fn brute_force_search(
    anchor: f64,
    pu: &Vec3,
    su: &Vec3,
    count: usize,
    gap: usize,
    mode: OddSchemeMode,
    c: &SystemConfig,
) -> Option<(u32, u32, f64, f64)> {
    let min_spacing = c.constants().unwrap().min_spacing;
    let mut best: Option<(u32, u32, f64, f64)> = None;
    for k_int in 1..=c.k_max {
        let dx_int = candidate_step(k_int as f64, anchor, pu, Role::Primary, c).unwrap();
        if dx_int < min_spacing {
            continue;
        }
        for k_un in 0..=c.k_max {
            let dx_un = candidate_step(b_increment(k_un, count, gap, mode), anchor, su, Role::Primary, c).unwrap();
            let diff = (dx_int - dx_un).abs();
            let better = match best {
                None => true,
                Some((bi, bu, _, bd)) => diff < bd || (diff == bd && (k_int, k_un) < (bi, bu)),
            };
            if better {
                best = Some((k_int, k_un, dx_int, diff));
            }
        }
    }
    best
}

fn c5_search_matches_brute_force() -> Outcome {
    let mut c = SystemConfig::default();
    c.k_max = 50;
    let mut rng = chunk_rng(505, 0);
    let mut mismatches = 0;
    for _ in 0..50 {
        let pu = random_user(&mut rng, Role::Primary, &c);
        let su = random_user(&mut rng, Role::Secondary, &c);
        let count = rng.random_range(2..=8);
        let gap = rng.random_range(2..=count);
        let anchor = rng.random::<f64>() * c.waveguide_length;
        let mode = if rng.random::<bool>() { OddSchemeMode::Literal } else { OddSchemeMode::ExactCancel };
        let got: PhaseSearchResult =
            phase_pair_search(anchor, &pu, &su, Role::Primary, count, gap, mode.into(), &c).unwrap();
        let want = brute_force_search(anchor, &pu, &su, count, gap, mode, &c).unwrap();
        if (got.k_intended, got.k_unintended, got.delta_x, got.residual_mismatch) != want {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches}/50 geometries differ from the double loop"))
}

fn wrapped_phase_error(xs: &[f64], user: &Vec3, role: Role, c: &SystemConfig) -> Vec<f64> {
    let k = c.constants().unwrap();
    let x0 = c.feed_x(role);
    let y = c.waveguide_y(role);
    let phase = |x: f64| {
        let d = ((x - user.x).powi(2) + (y - user.y).powi(2) + (c.waveguide_height - user.z).powi(2)).sqrt();
        2.0 * PI * d / k.wavelength + 2.0 * PI * (x - x0).abs() / k.guided_wavelength
    };
    xs.windows(2)
        .map(|w| {
            let cycles = (phase(w[1]) - phase(w[0])) / (2.0 * PI);
            (cycles - cycles.round()).abs() * 2.0 * PI
        })
        .collect()
}

fn c6_constructive_alignment() -> Outcome {
    let c = SystemConfig::default();
    let mode = OddSchemeMode::default();
    let coarse_pt = coarse_placement(PU.x, c.pa_count_primary, Role::Primary, &c).unwrap();
    let coarse_st = coarse_placement(SU.x, c.pa_count_secondary, Role::Secondary, &c).unwrap();
    let (pt, _) = refine_layout(&coarse_pt, &PU, &SU, mode.into(), &c).unwrap();
    let (st, _) = refine_layout(&coarse_st, &SU, &PU, mode.into(), &c).unwrap();
    let e_pt = wrapped_phase_error(&pt.xs, &PU, Role::Primary, &c);
    let e_st = wrapped_phase_error(&st.xs, &SU, Role::Secondary, &c);
    let worst = e_pt.iter().chain(&e_st).fold(0.0f64, |a, &b| a.max(b));
    let fmt = |e: &[f64]| e.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
    outcome(
        worst <= ALIGN_TOL_RAD,
        format!("K_max {}, per-gap rad PT [{}] ST [{}]", c.k_max, fmt(&e_pt), fmt(&e_st)),
    )
}

fn c7_power_control() -> Outcome {
    let mut rng = chunk_rng(707, 0);
    let mut bad = 0;
    let mut tight = 0;
    for _ in 0..100 {
        let mut c = SystemConfig::default();
        c.interference_threshold = pinching_cr::config::dbm_to_watts(rng.random_range(-100.0..-60.0));
        let (pu, su) = random_user_drop(&c, &mut rng);
        let sol = three_stage(&pu, &su, &c, OddSchemeMode::default()).unwrap();
        let psi_ps = psi(&sol.layout_st, &pu, &c).unwrap();
        let m = c.pa_count_secondary as f64;
        let expected = c.power_st_max.min(m * c.interference_threshold / psi_ps);
        let itc = sol.p_st / m * psi_ps;
        let ok = sol.p_st == expected
            && power_control(psi_ps, &c) == expected
            && sol.p_st <= c.power_st_max
            && itc <= c.interference_threshold * (1.0 + 1e-12);
        if !ok {
            bad += 1;
        }
        if sol.p_st < c.power_st_max {
            tight += 1;
        }
    }
    outcome(bad == 0, format!("{bad}/100 violations ({tight} with the interference limit active)"))
}

fn c8_qcqp() -> Outcome {
    let mut rng = chunk_rng(808, 0);
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_violation = 0.0f64;
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<Complex64> { (0..5).map(|_| complex_gaussian(rng)).collect() };
    for _ in 0..50 {
        let h_ss = draw(&mut rng);
        let h_sp = draw(&mut rng);
        let power = 1.0;
        let norm_sp: f64 = h_sp.iter().map(|x| x.norm_sqr()).sum();
        // Spans loose and tight interference limits.
        let threshold = norm_sp * power * 10f64.powf(rng.random_range(-3.0..0.5));
        let w = fpa_st_beamformer(&h_ss, &h_sp, power, threshold).unwrap();
        worst_violation = worst_violation
            .max((w.power() - power) / power)
            .max((w.gain(&h_sp) - threshold) / threshold);
        let mut best = 0.0f64;
        for _ in 0..100_000 {
            let v = draw(&mut rng);
            let vn: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            let p = power * rng.random::<f64>();
            let mut cand = Beamformer { weights: v.iter().map(|x| x * (p.sqrt() / vn)).collect() };
            let leak = cand.gain(&h_sp);
            if leak > threshold {
                let s = (threshold / leak).sqrt();
                cand.weights.iter_mut().for_each(|x| *x *= s);
            }
            best = best.max(cand.gain(&h_ss));
        }
        worst_gap = worst_gap.max((best - w.gain(&h_ss)) / best);
    }
    outcome(
        worst_gap <= QCQP_OBJ_REL_TOL && worst_violation <= QCQP_FEAS_TOL,
        format!("random search beats solver by at most {worst_gap:.2e} rel, worst violation {worst_violation:.2e}"),
    )
}

fn trend_table(text: &str) -> SweepTable {
    let spec = SweepSpec::from_kv_str(text, SystemConfig::default(), TREND_SEED).unwrap();
    sweep(&spec).unwrap()
}

fn stat(t: &SweepTable, v: f64, a: Algorithm) -> (f64, f64) {
    let r = t.row(v, a).unwrap();
    (r.mean_sum_se, r.stderr_sum_se)
}

fn c9_distance_trend() -> Outcome {
    let t = trend_table(&format!(
        "swept_param = \"pt_st_distance\"\nvalues = [6, 12, 24]\ndrops_per_point = {TREND_DROPS}\n"
    ));
    let mut ok = true;
    let mut notes = Vec::new();
    let mut gaps = Vec::new();
    for d in [6.0, 12.0, 24.0] {
        let (p, se) = stat(&t, d, Algorithm::Proposed);
        let pi = stat(&t, d, Algorithm::PiFoc).0;
        let fpa = stat(&t, d, Algorithm::Fpa).0;
        let margin = if d == 6.0 { se } else { 0.0 };
        ok &= p - pi >= margin && p - fpa >= margin;
        gaps.push(stat(&t, d, Algorithm::Ideal).0 - p);
        notes.push(format!("d={d}: prop {p:.3}±{se:.3} pi {:+.3} fpa {:+.3}", p - pi, p - fpa));
    }
    let gap_ok = gaps.windows(2).all(|w| w[1] <= w[0]);
    notes.push(format!("ideal gap {:.3} {:.3} {:.3}", gaps[0], gaps[1], gaps[2]));
    outcome(ok && gap_ok, notes.join("; "))
}

fn c10_count_trend() -> Outcome {
    let t = trend_table(&format!(
        "swept_param = \"n_primary\"\nvalues = [3, 4, 5]\ndrops_per_point = {TREND_DROPS}\nalgorithms = [\"proposed\", \"pi_foc\"]\n"
    ));
    let p: Vec<f64> = [3.0, 4.0, 5.0].iter().map(|&n| stat(&t, n, Algorithm::Proposed).0).collect();
    let (p5, se5) = stat(&t, 5.0, Algorithm::Proposed);
    let pi5 = stat(&t, 5.0, Algorithm::PiFoc).0;
    let monotone = p.windows(2).all(|w| w[1] >= w[0]);
    let below = pi5 <= p5 - se5;
    outcome(
        monotone && below,
        format!(
            "prop N=3,4,5: {:.3} {:.3} {:.3}; N=5 pi {pi5:.3} vs prop {p5:.3}±{se5:.3}",
            p[0], p[1], p[2]
        ),
    )
}

fn median_time(c: &SystemConfig, reps: usize) -> f64 {
    let mut samples: Vec<f64> = (0..9)
        .map(|_| {
            let t = Instant::now();
            for _ in 0..reps {
                std::hint::black_box(three_stage(&PU, &SU, c, OddSchemeMode::default()).unwrap());
            }
            t.elapsed().as_secs_f64() / reps as f64
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    samples[samples.len() / 2]
}

fn c11_complexity() -> Outcome {
    let with = |nm: usize, k: u32| {
        let mut c = SystemConfig::default();
        c.pa_count_primary = nm / 2;
        c.pa_count_secondary = nm / 2;
        c.k_max = k;
        c
    };
    let k = 10;
    let t4 = median_time(&with(4, k), 200);
    let t8 = median_time(&with(8, k), 200);
    let t16 = median_time(&with(16, k), 200);
    let tk = median_time(&with(8, 2 * k), 200);
    let (r1, r2, rk) = (t8 / t4, t16 / t8, tk / t8);
    outcome(
        r1 <= SIZE_GROWTH_MAX && r2 <= SIZE_GROWTH_MAX && rk <= K_GROWTH_MAX,
        format!("N+M 4->8 x{r1:.2}, 8->16 x{r2:.2}; K_max {k}->{} x{rk:.2}", 2 * k),
    )
}

fn c12_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("sweep.toml");
    fs::write(&spec, "swept_param = \"power_st\"\nvalues = [-10, 0, 10]\ndrops_per_point = 20\nfpa_samples = 200\n").unwrap();
    let run = |name: &str, threads: usize| -> Vec<u8> {
        let out = dir.path().join(name);
        let argv: Vec<String> = [
            "pinching-cr",
            "sweep",
            "--spec",
            spec.to_str().unwrap(),
            "--seed",
            "1212",
            "--out",
            out.to_str().unwrap(),
        ]
        .map(String::from)
        .to_vec();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let code = pool.install(|| parse_and_dispatch(&argv, &mut std::io::sink(), &mut std::io::sink()));
        assert_eq!(code, 0);
        fs::read(out).unwrap()
    };
    let a = run("a.csv", 4);
    let b = run("b.csv", 4);
    let c = run("c.csv", 1);
    outcome(a == b && a == c, format!("{} bytes; repeat identical {}, single-thread identical {}", a.len(), a == b, a == c))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("expected gain vs Monte Carlo", c1_psi_monte_carlo),
        ("sum SE closed form vs Monte Carlo", c2_sum_se_approximation),
        ("phasor sum identities", c3_phasor_identities),
        ("coarse placement optimality", c4_coarse_optimality),
        ("phase search vs brute force", c5_search_matches_brute_force),
        ("constructive alignment", c6_constructive_alignment),
        ("power control", c7_power_control),
        ("fixed-array beamformer", c8_qcqp),
        ("distance sweep trend", c9_distance_trend),
        ("PA count sweep trend", c10_count_trend),
        ("runtime scaling", c11_complexity),
        ("sweep determinism", c12_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !o.passed {
            failed += 1;
        }
        println!("{} {:>2} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
