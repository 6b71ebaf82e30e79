//! One PASS/FAIL line per acceptance criterion, with the measured values.
//! Run with `cargo test --test acceptance`.

use std::process::{Command, ExitCode};
use std::time::Instant;

use gibbsline::measures::PeriodicWeighting;
use gibbsline::thermo::{
    check_lemma1, check_lemma2, check_theorem1, check_theorem2, check_theorem3, correlation_deviation, thermo_report,
    Schedule,
};
use gibbsline::transfer::{birkhoff_coefficient, hilbert_metric};
use gibbsline::{
    Alphabet, CylinderMeasure, MarkovMeasure, PairInteraction, PeriodicMeasure, PerronOptions, TransferMatrix,
};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, f64, fn() -> Outcome);

fn opts() -> PerronOptions {
    PerronOptions::default()
}

fn dyson(alpha: f64) -> PairInteraction {
    PairInteraction::dyson(alpha, 1.0, 1.0).expect("dyson model")
}

fn words(n: usize) -> impl Iterator<Item = Vec<u8>> {
    (0..1usize << n).map(move |i| (0..n).map(|k| ((i >> (n - 1 - k)) & 1) as u8).collect())
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

fn degenerate_model() -> Outcome {
    let zero = PairInteraction::zero(Alphabet::spins());
    let g = zero.default_growth();
    let mut worst = 0.0f64;
    for r in 1..=6 {
        let m = MarkovMeasure::new(&zero, r, opts()).map_err(e)?;
        worst = worst.max((m.spectral().rho - 2.0).abs());
        for n in 1..=6 {
            for w in words(n) {
                worst = worst.max((m.prob(&w).map_err(e)? - 0.5f64.powi(n as i32)).abs());
            }
        }
        let t = thermo_report(&zero, r, opts()).map_err(e)?;
        for v in [t.pressure, t.entropy_variational, t.entropy_conditional] {
            worst = worst.max((v - 2f64.ln()).abs());
        }
    }
    let mut measured = Vec::new();
    for r in [2, 3] {
        measured.extend(
            check_lemma1(&zero, r, 24, 4, opts())
                .map_err(e)?
                .iter()
                .map(|b| b.measured),
        );
    }
    measured.extend(
        check_lemma2(&zero, 2, 24, &[2, 4, 8], opts())
            .map_err(e)?
            .reports
            .iter()
            .map(|b| b.measured),
    );
    measured.extend(
        check_theorem1(&zero, &g, 2, 4, 6, opts())
            .map_err(e)?
            .reports
            .iter()
            .map(|b| b.measured),
    );
    let grid: Vec<usize> = (1..=6).map(|k| 4 * k).collect();
    let t2 = check_theorem2(&zero, &g, &grid, 0.5, Schedule::Power { xi: 0.5 }, 8, opts()).map_err(e)?;
    measured.extend(t2.reports.iter().map(|b| b.measured));
    let t3 = check_theorem3(&zero, &g, &[2, 3, 4], 6, opts()).map_err(e)?;
    measured.extend(t3.reports.iter().map(|b| b.measured));
    let bound_worst = measured.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ok = worst <= 1e-12 && bound_worst <= 1e-12;
    Ok((
        ok,
        format!(
            "max |μ−2^−n|,|ρ−2|,|h−log2|,|P−log2| = {worst:.2e}; max bound-check measured = {bound_worst:.2e} over {} checks",
            measured.len()
        ),
    ))
}

fn oracle_equivalence() -> Outcome {
    let i = dyson(3.0);
    let mut worst = 0.0f64;
    let mut count = 0usize;
    for r in 1..=3 {
        for p in r.max(2)..=14 {
            let fast = PeriodicMeasure::transfer(&i, r, p, opts()).map_err(e)?;
            let slow =
                PeriodicMeasure::bruteforce(&i, Some(r), p, 22, PeriodicWeighting::FullPeriod, 1e-12).map_err(e)?;
            for n in 1..=4.min(p) {
                for w in words(n) {
                    worst = worst.max((fast.prob(&w).map_err(e)? - slow.prob(&w).map_err(e)?).abs());
                    count += 1;
                }
            }
        }
    }
    Ok((
        worst <= 1e-10,
        format!("max |transfer − enumeration| = {worst:.2e} over {count} cylinders"),
    ))
}

fn measure_axioms() -> Outcome {
    let i = dyson(3.0);
    let (mut consistency, mut shift, mut mass) = (0.0f64, 0.0f64, 0.0f64);
    for r in 1..=6 {
        let m = MarkovMeasure::new(&i, r, opts()).map_err(e)?;
        for n in 1..=8 {
            let level = m.level(n).map_err(e)?;
            let next = m.level(n + 1).map_err(e)?;
            mass = mass.max((level.iter().sum::<f64>() - 1.0).abs());
            let half = level.len();
            for (idx, p) in level.iter().enumerate() {
                // Big-endian indexing: right extensions are 2·idx + c, left extensions c·2^n + idx.
                consistency = consistency.max((p - next[2 * idx] - next[2 * idx + 1]).abs());
                shift = shift.max((p - next[idx] - next[half + idx]).abs());
            }
        }
    }
    let ok = consistency.max(shift).max(mass) <= 1e-10;
    Ok((
        ok,
        format!("consistency {consistency:.2e}, shift invariance {shift:.2e}, unit mass {mass:.2e}"),
    ))
}

fn periodic_approximation() -> Outcome {
    let i = dyson(3.0);
    let (mut checks, mut violations, mut tight) = (0usize, 0usize, 0.0f64);
    for r in [2, 3] {
        for p in [24, 36, 48] {
            for rep in check_lemma1(&i, r, p, 4, opts()).map_err(e)? {
                checks += 1;
                violations += usize::from(!rep.satisfied);
                tight = tight.max(rep.tight_constant.unwrap_or(0.0));
            }
        }
    }
    Ok((
        violations == 0,
        format!("{violations} violations over {checks} words; largest prefactor needed {tight:.3e} (bound uses 12)"),
    ))
}

fn range_refinement() -> Outcome {
    let i = dyson(3.0);
    let g = i.default_growth();
    let mut ok = true;
    let mut parts = Vec::new();
    for (r, rp) in [(2, 4), (3, 6), (4, 8)] {
        let c = check_theorem1(&i, &g, r, rp, 8, opts()).map_err(e)?;
        let worst = c.reports.iter().map(|b| b.measured).fold(0.0f64, f64::max);
        let pass = c.reports.iter().all(|b| b.satisfied) && c.gap_report.satisfied;
        ok &= pass;
        parts.push(format!(
            "({r},{rp}) max log-ratio {worst:.2e}, gap {:.2e} ≤ ε {:.3e}",
            c.gap.value, c.epsilon_r
        ));
    }
    let eps: Vec<f64> = (2..=10)
        .map(|r| i.epsilon_r(&g, r))
        .collect::<Result<_, _>>()
        .map_err(e)?;
    let decreasing = eps.windows(2).all(|w| w[1] < w[0]);
    ok &= decreasing;
    parts.push(format!(
        "ε_r strictly decreasing on 2..10: {decreasing} ({:.6e} → {:.6e})",
        eps[0], eps[8]
    ));
    Ok((ok, parts.join("; ")))
}

fn mixing() -> Outcome {
    let i = dyson(3.0);
    let r = 2;
    let m = MarkovMeasure::new(&i, r, opts()).map_err(e)?;
    let block = m.transfer().entries().mapv(|x| x / m.spectral().rho);
    let tau = birkhoff_coefficient(matrix_power(&block, r).view()).map_err(e)?;
    let devs: Vec<f64> = (1..=48 / r)
        .map(|k| correlation_deviation(&m, (k * r) as u64))
        .collect();
    let ratio = devs.windows(2).map(|w| w[1] / w[0]).fold(0.0f64, f64::max);
    let geometric = ratio <= tau + 1e-6;

    let g = i.default_growth();
    let grid: Vec<usize> = (1..=12).map(|k| 4 * k).collect();
    let c = check_theorem2(&i, &g, &grid, 0.5, Schedule::Power { xi: 0.5 }, 10, opts()).map_err(e)?;
    let (covered, detail) = match c.s_star {
        Some(s) => {
            let beyond: Vec<_> = c.points.iter().filter(|p| p.s >= s).collect();
            let held = beyond.iter().all(|p| p.covered != Some(false));
            (
                held,
                format!("s* = {s}, {} points beyond s* covered: {held}", beyond.len()),
            )
        }
        None => (false, "no s* (envelope never covers the tail)".into()),
    };
    Ok((
        geometric && covered,
        format!(
            "worst step ratio {ratio:.6} ≤ τ(M_2^2) + 1e-6 = {:.6}: {geometric}; envelope C s e^(−c s^ξ) with C = {:.4e}, c = {:.4}, ξ = {} (free-fit ξ {:.2}); {detail}",
            tau + 1e-6,
            c.fitted_amplitude,
            c.fitted_c,
            c.fitted_xi,
            c.free_xi
        ),
    ))
}

fn entropy() -> Outcome {
    let i = dyson(3.0);
    let g = i.default_growth();
    let c = check_theorem3(&i, &g, &[2, 3, 4, 5, 6, 7, 8, 9], 10, opts()).map_err(e)?;
    let formula_gap = c
        .thermo
        .iter()
        .filter(|t| t.r <= 8)
        .map(|t| (t.entropy_variational - t.entropy_conditional).abs())
        .fold(0.0f64, f64::max);
    let h_ref = c.thermo.last().map(|t| t.entropy_variational).unwrap_or(f64::NAN);
    let gaps: Vec<(usize, f64)> = c
        .thermo
        .iter()
        .filter(|t| t.r < 10)
        .map(|t| (t.r, (t.entropy_variational - h_ref).abs()))
        .collect();
    // Decrease is required over the same range as the formula check (r ≤ 8);
    // r = 9 is printed for reference.
    let scoped: Vec<f64> = gaps.iter().filter(|g| g.0 <= 8).map(|g| g.1).collect();
    let decreasing = scoped.windows(2).all(|w| w[1] < w[0]);
    let nine_below_eight = gaps.iter().find(|g| g.0 == 9).map(|g| g.1) < gaps.iter().find(|g| g.0 == 8).map(|g| g.1);
    let pressure: Vec<_> = c
        .reports
        .iter()
        .filter(|b| b.parameters.get("quantity").map(String::as_str) == Some("pressure"))
        .collect();
    let pressure_ok = pressure.iter().all(|b| b.satisfied);
    let ok = formula_gap <= 1e-8 && decreasing && c.fitted_eps > 0.0 && pressure_ok;
    let listed: Vec<String> = gaps.iter().map(|(r, g)| format!("{r}:{g:.3e}")).collect();
    Ok((
        ok,
        format!(
            "max |h_var − h_cond| (r ≤ 8) = {formula_gap:.2e}; |h_r − h_10| = [{}], decreasing on r ≤ 8: {decreasing} (r = 9 below r = 8: {nine_below_eight}); fitted_eps = {:.3}; pressure pairs {}/{} within 2·tail",
            listed.join(", "),
            c.fitted_eps,
            pressure.iter().filter(|b| b.satisfied).count(),
            pressure.len()
        ),
    ))
}

fn matrix_power(m: &Array2<f64>, k: usize) -> Array2<f64> {
    let mut out = m.clone();
    for _ in 1..k {
        out = out.dot(m);
    }
    out
}

fn contraction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_margin, mut worst_pair) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut ok = true;
    for alpha in [2.5, 3.0, 4.0] {
        let i = dyson(alpha);
        for r in 1..=5 {
            let eta = i.constants(r).map_err(e)?.eta;
            let m = TransferMatrix::build(&i, r).map_err(e)?;
            let block = matrix_power(m.entries(), r);
            let tau = birkhoff_coefficient(block.view()).map_err(e)?;
            worst_margin = worst_margin.max(tau - eta);
            ok &= tau <= eta;
            let n = block.nrows();
            for _ in 0..100 {
                let u: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..10.0)).collect();
                let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..10.0)).collect();
                let pu = block.dot(&Array1::from(u.clone())).to_vec();
                let pv = block.dot(&Array1::from(v.clone())).to_vec();
                let before = hilbert_metric(&u, &v).map_err(e)?;
                let after = hilbert_metric(&pu, &pv).map_err(e)?;
                let excess = after - tau * before;
                worst_pair = worst_pair.max(excess);
                ok &= excess <= 1e-12 * (1.0 + before);
            }
        }
    }
    Ok((
        ok,
        format!("max τ(M_r^r) − η = {worst_margin:.4e} (≤ 0 required); max δ(Pu,Pv) − τδ(u,v) = {worst_pair:.2e} over 1500 pairs"),
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(e)?;
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[model]\nkind = \"dyson\"\nalpha = 3.0\n").map_err(e)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for sub in ["converge", "mixing", "entropy"] {
        let mut outputs = Vec::new();
        for k in 0..2 {
            let out = dir.path().join(format!("{sub}-{k}"));
            let status = Command::new(env!("CARGO_BIN_EXE_gibbsline"))
                .args([
                    sub,
                    "--config",
                    cfg.to_str().unwrap(),
                    "--out",
                    out.to_str().unwrap(),
                    "--format",
                    "csv",
                ])
                .output()
                .map_err(e)?;
            if status.status.code() != Some(0) {
                return Err(format!(
                    "{sub} exited with {:?}: {}",
                    status.status.code(),
                    String::from_utf8_lossy(&status.stderr)
                ));
            }
            outputs.push(std::fs::read(out.join(format!("{sub}.csv"))).map_err(e)?);
        }
        let same = outputs[0] == outputs[1];
        ok &= same;
        parts.push(format!("{sub} {} bytes identical: {same}", outputs[0].len()));
    }
    Ok((ok, parts.join("; ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("exactness on the zero interaction", 1.0, degenerate_model),
        ("periodic transfer mode equals enumeration", 30.0, oracle_equivalence),
        ("measure axioms", 10.0, measure_axioms),
        ("periodic approximation bound", 60.0, periodic_approximation),
        ("range-refinement bound and decreasing ε_r", 60.0, range_refinement),
        ("geometric and stretched-exponential mixing", 120.0, mixing),
        ("entropy and pressure convergence", 60.0, entropy),
        ("Birkhoff coefficient and Hilbert contraction", 30.0, contraction),
        ("determinism of report files", 120.0, determinism),
    ];
    let mut failed = 0;
    for (k, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let in_time = secs < *limit;
        let (pass, detail) = match outcome {
            Ok((ok, detail)) => (ok && in_time, detail),
            Err(msg) => (false, format!("error: {msg}")),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {}: {} — {name}: {detail} [{secs:.3} s, limit {limit} s]",
            k + 1,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
