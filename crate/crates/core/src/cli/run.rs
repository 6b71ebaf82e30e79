use crate::cli::config::RunConfig;
use crate::cli::report::{Cell, ReportEnvelope, Subcommand};
use crate::error::{Error, Result};
use crate::interactions::PairInteraction;
use crate::lattice::{decode, Word};
use crate::measures::{gibbs_constant_scan, projective_gap, CylinderMeasure, MarkovMeasure, PeriodicMeasure};
use crate::thermo::{
    check_lemma1, check_lemma2, check_theorem2, check_theorem3, thermo_of, BoundReport, Schedule, VERDICT_TOL,
};
use crate::transfer::{birkhoff_coefficient, matrix_power};

/// Errors that mean "the bound is undefined for this model" rather than a failure.
fn is_refusal(e: &Error) -> bool {
    matches!(e, Error::Refused(_) | Error::Divergent(_))
}

struct Builder {
    env: ReportEnvelope,
}

impl Builder {
    fn new(cfg: &RunConfig, sub: Subcommand, columns: Vec<&'static str>) -> Self {
        Self {
            env: ReportEnvelope {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                config_hash: cfg.hash(),
                subcommand: sub,
                timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                columns,
                rows: Vec::new(),
                summary: Vec::new(),
                violations: 0,
                refusals: 0,
            },
        }
    }

    fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.env.columns.len());
        self.env.rows.push(cells);
    }

    fn summary(&mut self, key: impl Into<String>, v: Cell) {
        self.env.summary.push((key.into(), v));
    }

    /// Records a verdict; returns its label.
    fn verdict(&mut self, ok: bool) -> Cell {
        if !ok {
            self.env.violations += 1;
        }
        Cell::Bool(ok)
    }

    fn refuse(&mut self, e: &Error) -> Result<()> {
        if is_refusal(e) {
            self.env.refusals += 1;
            Ok(())
        } else {
            Err(Error::InvalidArgument(e.to_string()))
        }
    }
}

/// Runs one subcommand; inner errors carry the scan point that raised them.
pub fn run_subcommand(cfg: &RunConfig, sub: Subcommand) -> Result<ReportEnvelope> {
    let interaction = cfg.interaction()?;
    let out = match sub {
        Subcommand::Spectrum => spectrum(cfg, &interaction),
        Subcommand::Measure => measure(cfg, &interaction),
        Subcommand::Converge => converge(cfg, &interaction),
        Subcommand::Mixing => mixing(cfg, &interaction),
        Subcommand::Entropy => entropy(cfg, &interaction),
        Subcommand::CheckBounds => check_bounds(cfg, &interaction),
    }?;
    Ok(out.env)
}

fn at<T>(what: String, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Refused(_) | Error::Divergent(_) => e,
        other => Error::InvalidArgument(format!("{what}: {other}")),
    })
}

fn spectrum(cfg: &RunConfig, i: &PairInteraction) -> Result<Builder> {
    let mut b = Builder::new(
        cfg,
        Subcommand::Spectrum,
        vec![
            "r",
            "dim",
            "rho",
            "log_rho",
            "lambda2_mod",
            "spectral_ratio",
            "residual",
            "iterations",
            "birkhoff_tau",
            "eta",
            "tau_within_eta",
        ],
    );
    for &r in &cfg.spectrum.r {
        let m = at(format!("r={r}"), MarkovMeasure::new(i, r, cfg.perron_options()))?;
        let s = m.spectral();
        let tau = at(
            format!("r={r}"),
            birkhoff_coefficient(matrix_power(&m.transfer().entries().mapv(|x| x / s.rho), r as u64).view()),
        )?;
        let (eta, within) = match i.constants(r) {
            Ok(k) => {
                let ok = tau <= k.eta + VERDICT_TOL;
                (Cell::Real(k.eta), b.verdict(ok))
            }
            Err(e) => {
                b.refuse(&e)?;
                (Cell::Empty, Cell::text("refused"))
            }
        };
        b.row(vec![
            Cell::int(r),
            Cell::int(m.transfer().dim()),
            Cell::Real(s.rho),
            Cell::Real(s.rho.ln()),
            Cell::Real(s.lambda2_mod),
            Cell::Real(s.spectral_ratio()),
            Cell::Real(s.residual),
            Cell::int(s.iterations),
            Cell::Real(tau),
            eta,
            within,
        ]);
    }
    Ok(b)
}

fn measure(cfg: &RunConfig, i: &PairInteraction) -> Result<Builder> {
    let mut b = Builder::new(
        cfg,
        Subcommand::Measure,
        vec!["r", "length", "word", "markov", "period", "periodic", "log_ratio"],
    );
    let mc = &cfg.measure;
    let m = at(format!("r={}", mc.r), MarkovMeasure::new(i, mc.r, cfg.perron_options()))?;
    let periodic = if mc.period > 0 {
        Some(at(
            format!("r={}, p={}", mc.r, mc.period),
            PeriodicMeasure::transfer(i, mc.r, mc.period, cfg.perron_options()),
        )?)
    } else {
        None
    };
    let base = m.alphabet_size();
    for n in 1..=mc.max_len {
        let level = m.level(n)?;
        let plevel = periodic.as_ref().map(|p| p.level(n)).transpose()?;
        for (idx, mu) in level.iter().enumerate() {
            let (per, ratio) = match &plevel {
                Some(pl) => (Cell::Real(pl[idx]), Cell::Real((mu / pl[idx]).ln())),
                None => (Cell::Empty, Cell::Empty),
            };
            b.row(vec![
                Cell::int(mc.r),
                Cell::int(n),
                Cell::text(Word::from_symbols(decode(idx, n, base)).to_string()),
                Cell::Real(*mu),
                if mc.period > 0 {
                    Cell::int(mc.period)
                } else {
                    Cell::Empty
                },
                per,
                ratio,
            ]);
        }
    }
    let horizon = cfg.limits.n_max.max(mc.r);
    let g = gibbs_constant_scan(&m, horizon)?;
    b.summary("gibbs_n_max", Cell::int(horizon));
    b.summary("gibbs_c_low", Cell::Real(g.c_low));
    b.summary("gibbs_c_high", Cell::Real(g.c_high));
    Ok(b)
}

fn converge(cfg: &RunConfig, i: &PairInteraction) -> Result<Builder> {
    let mut b = Builder::new(
        cfg,
        Subcommand::Converge,
        vec!["r", "epsilon_r", "projective_gap", "worst_word", "satisfied"],
    );
    let c = &cfg.converge;
    let g = cfg.growth_spec()?;
    let opts = cfg.perron_options();
    let reference = at(format!("r_ref={}", c.r_ref), MarkovMeasure::new(i, c.r_ref, opts))?;
    let mut gaps = Vec::new();
    for &r in &c.r {
        let m = at(format!("r={r}"), MarkovMeasure::new(i, r, opts))?;
        let gap = at(format!("r={r}"), projective_gap(&m, &reference, c.n_max))?;
        gaps.push(gap.value);
        let (eps, sat) = match i.epsilon_r(&g, r) {
            Ok(e) => {
                let ok = gap.value <= e + VERDICT_TOL;
                (Cell::Real(e), b.verdict(ok))
            }
            Err(e) => {
                b.refuse(&e)?;
                (Cell::Empty, Cell::text("refused"))
            }
        };
        b.row(vec![
            Cell::int(r),
            eps,
            Cell::Real(gap.value),
            Cell::text(gap.worst_word.to_string()),
            sat,
        ]);
    }
    b.summary("r_ref", Cell::int(c.r_ref));
    b.summary("n_max", Cell::int(c.n_max));
    b.summary("gap_monotone", Cell::Bool(gaps.windows(2).all(|w| w[1] <= w[0])));
    Ok(b)
}

fn mixing(cfg: &RunConfig, i: &PairInteraction) -> Result<Builder> {
    let mut b = Builder::new(
        cfg,
        Subcommand::Mixing,
        vec![
            "s",
            "r",
            "deviation",
            "envelope",
            "proxy_error",
            "bound",
            "covered",
            "satisfied",
        ],
    );
    let x = &cfg.mixing;
    let schedule = if x.r_fixed > 0 {
        Schedule::Fixed(x.r_fixed)
    } else {
        Schedule::Power { xi: x.xi }
    };
    let g = cfg.growth_spec()?;
    let check = match check_theorem2(i, &g, &x.s, x.xi, schedule, cfg.limits.r_max, cfg.perron_options()) {
        Ok(c) => c,
        Err(e) => {
            b.refuse(&e)?;
            b.summary("refused", Cell::text(e.to_string()));
            return Ok(b);
        }
    };
    for (p, rep) in check.points.iter().zip(&check.reports) {
        let sat = b.verdict(rep.satisfied);
        b.row(vec![
            Cell::int(p.s),
            Cell::int(p.r),
            Cell::Real(p.deviation),
            Cell::Real(p.envelope),
            Cell::Real(p.proxy_error),
            Cell::Real(rep.bound),
            p.covered.map_or(Cell::Empty, Cell::Bool),
            sat,
        ]);
    }
    b.summary("fitted_c", Cell::Real(check.fitted_c));
    b.summary("fitted_xi", Cell::Real(check.fitted_xi));
    b.summary("fitted_amplitude", Cell::Real(check.fitted_amplitude));
    b.summary("free_xi", Cell::Real(check.free_xi));
    b.summary("fit_points", Cell::int(check.fit_points));
    b.summary("s_star", check.s_star.map_or(Cell::Empty, Cell::int));
    Ok(b)
}

fn entropy(cfg: &RunConfig, i: &PairInteraction) -> Result<Builder> {
    let mut b = Builder::new(
        cfg,
        Subcommand::Entropy,
        vec![
            "kind",
            "r",
            "r_prime",
            "pressure",
            "energy",
            "entropy_variational",
            "entropy_conditional",
            "measured",
            "bound",
            "satisfied",
        ],
    );
    let e = &cfg.entropy;
    let opts = cfg.perron_options();
    let thermo_row = |t: &crate::thermo::ThermoReport, r_prime: Cell, rep: Option<(&BoundReport, Cell)>| {
        let (measured, bound, sat) = match rep {
            Some((rep, sat)) => (Cell::Real(rep.measured), Cell::Real(rep.bound), sat),
            None => (Cell::Empty, Cell::Empty, Cell::Empty),
        };
        vec![
            Cell::text("thermo"),
            Cell::int(t.r),
            r_prime,
            Cell::Real(t.pressure),
            Cell::Real(t.energy),
            Cell::Real(t.entropy_variational),
            Cell::Real(t.entropy_conditional),
            measured,
            bound,
            sat,
        ]
    };
    let fit_ready = e.r.iter().filter(|&&r| r < e.r_ref).count() >= 3;
    let g = cfg.growth_spec()?;
    let check = if fit_ready {
        match check_theorem3(i, &g, &e.r, e.r_ref, opts) {
            Ok(c) => Some(c),
            Err(err) => {
                b.refuse(&err)?;
                b.summary("theorem3_refused", Cell::text(err.to_string()));
                None
            }
        }
    } else {
        None
    };
    match check {
        Some(c) => {
            let n_entropy = c.thermo.len() - 1;
            for (t, rep) in c.thermo.iter().zip(&c.reports[..n_entropy]) {
                let sat = b.verdict(rep.satisfied);
                let row = thermo_row(t, Cell::int(c.r_ref), Some((rep, sat)));
                b.row(row);
            }
            let reference = c.thermo.last().expect("reference row");
            b.row(thermo_row(reference, Cell::Empty, None));
            for rep in &c.reports[n_entropy..] {
                let sat = b.verdict(rep.satisfied);
                b.row(vec![
                    Cell::text("pressure"),
                    Cell::text(rep.parameters["r"].clone()),
                    Cell::text(rep.parameters["r_prime"].clone()),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Real(rep.measured),
                    Cell::Real(rep.bound),
                    sat,
                ]);
            }
            b.summary("fitted_eps", Cell::Real(c.fitted_eps));
            b.summary("fitted_amplitude", Cell::Real(c.fitted_amplitude));
            b.summary("proxy_error", Cell::Real(c.proxy_error));
            for (r, res) in &c.fit_residuals {
                b.summary(format!("fit_residual_r{r}"), Cell::Real(*res));
            }
        }
        None => {
            for &r in &e.r {
                let m = at(format!("r={r}"), MarkovMeasure::new(i, r, opts))?;
                b.row(thermo_row(&thermo_of(&m), Cell::Empty, None));
            }
        }
    }
    Ok(b)
}

fn check_bounds(cfg: &RunConfig, i: &PairInteraction) -> Result<Builder> {
    let mut b = Builder::new(
        cfg,
        Subcommand::CheckBounds,
        vec![
            "claim",
            "r",
            "p",
            "s",
            "n",
            "word",
            "bound",
            "measured",
            "slack",
            "tight_constant",
            "status",
            "detail",
        ],
    );
    let cb = &cfg.check_bounds;
    let opts = cfg.perron_options();
    let param = |rep: &BoundReport, k: &str| rep.parameters.get(k).map_or(Cell::Empty, |v| Cell::text(v.clone()));
    let push = |b: &mut Builder, rep: &BoundReport| {
        if !rep.satisfied {
            b.env.violations += 1;
        }
        b.row(vec![
            Cell::text(rep.claim.to_string()),
            param(rep, "r"),
            param(rep, "p"),
            param(rep, "s"),
            param(rep, "n"),
            param(rep, "word"),
            Cell::Real(rep.bound),
            Cell::Real(rep.measured),
            Cell::Real(rep.slack),
            Cell::opt_real(rep.tight_constant),
            Cell::text(if rep.satisfied { "satisfied" } else { "violated" }),
            Cell::Empty,
        ]);
    };
    let refusal_row = |b: &mut Builder, claim: &str, r: usize, p: usize, e: &Error| {
        b.row(vec![
            Cell::text(claim),
            Cell::int(r),
            Cell::int(p),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::text("refused"),
            Cell::text(e.to_string()),
        ]);
    };
    for &r in &cb.lemma1_r {
        for &p in &cb.lemma1_p {
            match check_lemma1(i, r, p, cb.lemma1_n_max, opts) {
                Ok(reps) => reps.iter().for_each(|rep| push(&mut b, rep)),
                Err(e) => {
                    b.refuse(&e)
                        .map_err(|_| Error::InvalidArgument(format!("lemma1 r={r} p={p}: {e}")))?;
                    refusal_row(&mut b, "lemma1", r, p, &e);
                }
            }
        }
    }
    for &r in &cb.lemma2_r {
        match check_lemma2(i, r, cb.lemma2_p, &cb.lemma2_s, opts) {
            Ok(c) => {
                c.reports.iter().for_each(|rep| push(&mut b, rep));
                b.summary(format!("lemma2_r{r}_d_hat"), Cell::Real(c.d_hat));
                b.summary(format!("lemma2_r{r}_tau"), Cell::Real(c.tau));
                b.summary(format!("lemma2_r{r}_eta"), Cell::Real(c.eta));
            }
            Err(e) => {
                b.refuse(&e)
                    .map_err(|_| Error::InvalidArgument(format!("lemma2 r={r} p={}: {e}", cb.lemma2_p)))?;
                refusal_row(&mut b, "lemma2", r, cb.lemma2_p, &e);
            }
        }
    }
    Ok(b)
}
