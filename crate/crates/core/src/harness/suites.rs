use std::time::Instant;

use log::info;
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use super::checks::{
    amplitude_consistency, bessel_recurrence_residual, comparison_negativity, conjugated_projector, conjugation_match,
    fft_oracle_residual, gauge_covariance, graph_norm_interval, identity_reproduction, multiplication_exactness,
    ps_product_residual, random_pairs, similarity_mismatch, sobolev_characterization_interval, spread_drift,
    taylor_operator_identity, weight_identity_check,
};
use super::config::{ScenarioConfig, Suite};
use super::report::{
    emit_report, CheckOutcome, Comparison, Eps0Summary, LabelledFit, ReportFormat, ScenarioReport, SpectrumSummary,
    SuiteOutcome,
};
use crate::decay::{
    analytic_eps0, decay_certificate, decay_fit, eigenvector_correspondence_residual, epsilon0_estimate,
    uniform_bound_sweep, BoundSweep, DecayFit, FitMode, FitWindow, WeightFamily,
};
use crate::error::{Error, Result};
use crate::gauge::GaugeData;
use crate::grid::{Grid, GridFunction, MAX_DIM};
use crate::persist::{content_hash, encode_operator, save_operator};
use crate::potential::PotentialSpec;
use crate::quantize::{op_weyl, OperatorMatrix, DIRECT_SUM_BUDGET};
use crate::relativistic::{
    build_form_sum, diamagnetic_check, free_kernel_consistency, kato_estimate, kato_limit_scan, pointwise_bound_check,
    semigroup_checks, BesselOrder, KatoScan,
};
use crate::spectral::{discrete_spectrum_select, eig_hermitian, EigenDecomposition, SpectralWindow};
use crate::symbol::{cauchy_derivative_bound_check, ellipticity_check, eval_analytic, HormanderSymbol, SampleBox};

/// Pairs sampled for the weight identities.
pub const WEIGHT_PAIRS: usize = 10_000;

/// Random trial vectors of the diamagnetic comparison.
pub const DIAMAGNETIC_TRIALS: usize = 20;

/// Halvings in a Kato scan.
pub const KATO_LEVELS: usize = 5;

/// Largest eps used for the discrete conjugation checks.
pub const CONJUGATION_EPS: f64 = 0.05;

/// Margin below the essential threshold for an eigenvalue to count as discrete.
pub const DISCRETE_MARGIN: f64 = 1e-6;

/// An assembled main operator and its eigendecomposition.
struct Main {
    op: OperatorMatrix,
    dec: EigenDecomposition,
    form_bound: Option<f64>,
}

/// Operators, fits and sweeps shared by the suites of one scenario.
struct Context<'a> {
    cfg: &'a ScenarioConfig,
    grid: Grid,
    gauge: GaugeData,
    symbol: HormanderSymbol,
    potential: PotentialSpec,
    main: Option<Main>,
    refined: Option<Main>,
    fits: Vec<LabelledFit>,
    sweeps: Vec<BoundSweep>,
    eps0: Option<Eps0Summary>,
    kato: Option<KatoScan>,
}

impl<'a> Context<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            grid: cfg.grid()?,
            gauge: cfg.gauge()?,
            symbol: cfg.symbol()?,
            potential: cfg.potential()?,
            main: None,
            refined: None,
            fits: Vec::new(),
            sweeps: Vec::new(),
            eps0: None,
            kato: None,
        })
    }

    /// A seed derived from the scenario seed and a purpose label, so each
    /// suite draws the same numbers whatever else runs.
    fn seed_for(&self, purpose: &str) -> u64 {
        let digest = Sha256::new()
            .chain_update(self.cfg.seed.to_le_bytes())
            .chain_update(purpose.as_bytes())
            .finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    fn uses_form_sum(&self) -> bool {
        self.symbol.id() == "relativistic" && !self.potential.is_zero()
    }

    /// The symbol with the potential added, for regular potentials.
    fn full_symbol(&self) -> Result<HormanderSymbol> {
        self.symbol.clone().with_potential(self.potential.clone())
    }

    fn build(&self, grid: &Grid) -> Result<(OperatorMatrix, Option<f64>)> {
        if self.uses_form_sum() {
            let fs = build_form_sum(&self.gauge, &self.potential, grid)?;
            Ok((fs.operator, Some(fs.form_bound)))
        } else {
            let op = op_weyl(&self.full_symbol()?, &self.gauge, grid)?;
            Ok((if self.symbol.is_real() { op.hermitize() } else { op }, None))
        }
    }

    fn main(&mut self) -> Result<&Main> {
        if self.main.is_none() {
            let (op, form_bound) = self.build(&self.grid)?;
            let dec = eig_hermitian(&op)?;
            self.main = Some(Main { op, dec, form_bound });
        }
        Ok(self.main.as_ref().expect("just built"))
    }

    /// The main operator rebuilt on the refined grid.
    fn refined(&mut self) -> Result<&Main> {
        if self.refined.is_none() {
            let (op, form_bound) = self.build(&refined(&self.grid)?)?;
            let dec = eig_hermitian(&op)?;
            self.refined = Some(Main { op, dec, form_bound });
        }
        Ok(self.refined.as_ref().expect("just built"))
    }

    fn threshold(&self, suite: Suite) -> Result<f64> {
        self.cfg
            .essential_threshold
            .ok_or_else(|| Error::Config(format!("suite `{suite}` needs `essential_threshold`")))
    }

    /// Lowest eigenpair below the essential threshold.
    fn ground_state(&mut self, suite: Suite) -> Result<(usize, f64, GridFunction, usize)> {
        let threshold = self.threshold(suite)?;
        let grid = self.grid;
        let main = self.main()?;
        let window = SpectralWindow::new(threshold, DISCRETE_MARGIN)?;
        let discrete = discrete_spectrum_select(&main.dec, &window);
        let first = discrete
            .first()
            .ok_or_else(|| Error::NotApplicable(format!("no eigenvalue below the essential threshold {threshold}")))?;
        let u = GridFunction::new(grid, first.eigenvector.clone())?;
        Ok((first.index, first.eigenvalue, u, discrete.len()))
    }

    fn window(&self) -> FitWindow {
        self.cfg
            .window()
            .unwrap_or_else(|| FitWindow::default_for(self.grid.half_length()))
    }

    fn record_fit(&mut self, label: &str, fit: &DecayFit) {
        self.fits.push(LabelledFit {
            label: label.into(),
            fit: fit.clone(),
        });
    }
}

/// `(4/3 L, 3/2 n)` with `n` rounded up to even.
fn refined(grid: &Grid) -> Result<Grid> {
    let n = (3 * grid.points()).div_ceil(2);
    Grid::new(grid.dim(), grid.half_length() * 4.0 / 3.0, n + n % 2)
}

fn direct_sum_fits(grid: &Grid) -> bool {
    (grid.size() as f64).powi(3) <= DIRECT_SUM_BUDGET
}

struct Checks(Vec<CheckOutcome>);

impl Checks {
    fn add(&mut self, name: &str, invariant: &str, value: f64, cmp: Comparison, threshold: f64) -> &mut CheckOutcome {
        self.0.push(CheckOutcome::new(name, invariant, value, cmp, threshold));
        self.0.last_mut().expect("just pushed")
    }
}

fn quantize_core(ctx: &mut Context, out: &mut Checks) -> Result<()> {
    let grid = ctx.grid;
    let g = ctx.gauge.clone();
    let d = grid.dim();
    out.add(
        "identity",
        "quantize/identity-reproduction",
        identity_reproduction(&g, &grid)?,
        Comparison::AtMost,
        0.0,
    );
    let v = if ctx.potential.is_zero() || ctx.potential.is_singular() {
        PotentialSpec::gauss_well(1.0, 1.0)
    } else {
        ctx.potential.clone()
    };
    out.add(
        "multiplication",
        "quantize/multiplication-exactness",
        multiplication_exactness(&v, &g, &grid)?,
        Comparison::AtMost,
        0.0,
    )
    .note = Some(format!("potential {}", v.id()));
    if g.is_trivial() {
        if ctx.symbol.is_core_x_independent() {
            out.add(
                "dft_oracle",
                "quantize/dft-oracle",
                fft_oracle_residual(&ctx.symbol, &grid)?,
                Comparison::AtMost,
                1e-10,
            );
        }
        out.add(
            "p1_pm1",
            "quantize/p1-p-1-identity",
            ps_product_residual(&grid)?,
            Comparison::AtMost,
            1e-10,
        );
    }
    let sym = if ctx.potential.is_singular() {
        ctx.symbol.clone()
    } else {
        ctx.full_symbol()?
    };
    if sym.is_real() {
        out.add(
            "hermiticity_defect",
            "quantize/hermiticity-defect",
            op_weyl(&sym, &g, &grid)?.hermiticity_defect(),
            Comparison::AtMost,
            1e-8,
        );
        let cov = gauge_covariance(&sym, &g, &grid)?;
        out.add(
            "gauge_spectra",
            "quantize/gauge-covariance",
            cov.spectrum_mismatch,
            Comparison::AtMost,
            1e-8,
        );
        out.add(
            "gauge_alignment",
            "quantize/gauge-covariance",
            cov.alignment_residual,
            Comparison::AtMost,
            1e-6,
        );
    }
    if direct_sum_fits(&grid) {
        out.add(
            "amplitude_midpoint",
            "quantize/amplitude-consistency",
            amplitude_consistency(&sym, &g, &grid)?,
            Comparison::AtMost,
            1e-12,
        );
    }
    if d == 1 {
        let fine = grid.with_points(2 * grid.points())?;
        if ctx.symbol.order() == 1.0 && sym.is_real() {
            let coarse_op = op_weyl(&sym, &g, &grid)?.hermitize();
            let fine_op = op_weyl(&sym, &g, &fine)?.hermitize();
            let a = graph_norm_interval(&coarse_op, &g)?;
            let b = graph_norm_interval(&fine_op, &g)?;
            out.add(
                "graph_norm_drift",
                "quantize/graph-norm-equivalence",
                spread_drift(a, b),
                Comparison::AtMost,
                0.2,
            )
            .note = Some(format!("[{:.4}, {:.4}] -> [{:.4}, {:.4}]", a.0, a.1, b.0, b.1));
        }
        let a = sobolev_characterization_interval(&g, &grid)?;
        let b = sobolev_characterization_interval(&g, &fine)?;
        out.add(
            "sobolev_drift",
            "quantize/sobolev-characterization",
            spread_drift(a, b),
            Comparison::AtMost,
            0.2,
        )
        .note = Some(format!("[{:.4}, {:.4}] -> [{:.4}, {:.4}]", a.0, a.1, b.0, b.1));
    }
    gauge_invariants(ctx, out);
    if ctx.symbol.has_analytic_extension() {
        let x0 = [0.0; MAX_DIM];
        let xi = [0.0; MAX_DIM];
        let top = grid.nyquist();
        let mut worst = 0.0f64;
        for i in 0..=64 {
            let e = -top + 2.0 * top * i as f64 / 64.0;
            let eta = [e, 0.5 * e];
            let a = eval_analytic(&ctx.symbol, &x0[..d], &eta[..d], &xi[..d])?;
            worst = worst.max((a - ctx.symbol.eval(&x0[..d], &eta[..d])).norm());
        }
        out.add(
            "restriction",
            "symbol/restriction-consistency",
            worst,
            Comparison::Below,
            1e-12,
        );
    }
    Ok(())
}

fn gauge_invariants(ctx: &Context, out: &mut Checks) {
    let g = &ctx.gauge;
    let grid = ctx.grid;
    let d = grid.dim();
    let l = grid.half_length();
    let pairs = random_pairs(ctx.seed_for("gauge-pairs"), 256, d, l);
    let mut symmetry = 0.0f64;
    let mut cocycle = 0.0f64;
    for (k, (x, y)) in pairs.iter().enumerate() {
        symmetry = symmetry.max((g.phase(x, y) * g.phase(y, x) - Complex64::new(1.0, 0.0)).norm());
        let t = (k as f64 + 0.5) / pairs.len() as f64;
        let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + t * (b - a)).collect();
        cocycle = cocycle.max((g.line_integral(x, &z) + g.line_integral(&z, y) - g.line_integral(x, y)).abs());
    }
    out.add(
        "phase_symmetry",
        "gauge/hermitian-phase-symmetry",
        symmetry,
        Comparison::AtMost,
        1e-12,
    );
    out.add(
        "phase_cocycle",
        "gauge/degenerate-cocycle",
        cocycle,
        Comparison::AtMost,
        1e-12,
    );
    if d == 2 {
        let axis: Vec<f64> = (0..32).map(|i| -l + 2.0 * l * i as f64 / 31.0).collect();
        let lattice: Vec<[f64; MAX_DIM]> = axis.iter().flat_map(|&a| axis.iter().map(move |&b| [a, b])).collect();
        out.add(
            "curl",
            "gauge/curl-equals-field",
            g.curl_residual(&lattice),
            Comparison::Below,
            1e-6,
        );
    }
}

/// The largest swept eps up to `CONJUGATION_EPS` and the strip-safe bound.
fn conjugation_eps(ctx: &Context, eps0: f64) -> f64 {
    let cap = eps0.min(CONJUGATION_EPS);
    ctx.cfg
        .eps_list
        .iter()
        .copied()
        .filter(|&e| e <= cap)
        .fold(None, |_, e| Some(e))
        .unwrap_or(cap)
}

fn lemmas_weights(ctx: &mut Context, out: &mut Checks) -> Result<()> {
    let sym = ctx.symbol.clone();
    let eps0 = analytic_eps0(&sym)
        .ok_or_else(|| Error::NotApplicable(format!("`{}` has no holomorphic extension", sym.id())))?;
    let grid = ctx.grid;
    let g = ctx.gauge.clone();
    let d = grid.dim();
    let sample = SampleBox::new(grid.half_length(), grid.nyquist());
    let cauchy = cauchy_derivative_bound_check(&sym, 4, &sample)?;
    out.add(
        "cauchy_bound",
        "symbol/cauchy-bound",
        cauchy.worst_ratio,
        Comparison::AtMost,
        1.0,
    );

    let pairs = random_pairs(ctx.seed_for("weight-pairs"), WEIGHT_PAIRS, d, grid.half_length());
    let exp = weight_identity_check(&WeightFamily::exponential(), &ctx.cfg.eps_list, &pairs);
    out.add(
        "weight_identity_exp",
        "decay/weight-identity",
        exp.taylor_residual,
        Comparison::Below,
        1e-12,
    );
    out.add(
        "b_bound",
        "decay/b-bound",
        exp.b_violations as f64,
        Comparison::AtMost,
        0.0,
    )
    .note = Some(format!("max |b| = {:.15}", exp.b_max));
    let weight = ctx.cfg.weight()?;
    if !weight.is_exponential() {
        let poly = weight_identity_check(&weight, &ctx.cfg.eps_list, &pairs);
        out.add(
            "weight_identity_poly",
            "decay/weight-identity",
            poly.taylor_residual,
            Comparison::Below,
            1e-12,
        )
        .note = Some(weight.to_string());
    }

    let eps = conjugation_eps(ctx, eps0);
    let ratio = conjugation_match(&sym, &g, &grid, eps)?;
    out.add(
        "conjugation_match",
        "decay/conjugation-match",
        ratio,
        Comparison::Below,
        1e-3,
    )
    .note = Some(format!("eps = {eps}"));
    let half = grid.points() / 2;
    if half >= 8 && half % 2 == 0 {
        let coarse = conjugation_match(&sym, &g, &grid.with_points(half)?, eps)?;
        out.add(
            "conjugation_refinement",
            "decay/conjugation-match",
            ratio / coarse,
            Comparison::Below,
            1.0,
        )
        .note = Some(format!("n = {half}: {coarse:.3e}, n = {}: {ratio:.3e}", grid.points()));
    }
    out.add(
        "operator_identity",
        "decay/operator-identity",
        taylor_operator_identity(&sym, &g, &grid, eps)?,
        Comparison::Below,
        1e-8,
    );
    Ok(())
}

fn thm1_rapid_decay(ctx: &mut Context, out: &mut Checks) -> Result<()> {
    let suite = Suite::Thm1RapidDecay;
    let sym = ctx.symbol.clone();
    if !(sym.order() > 0.0) {
        return Err(Error::NotApplicable(format!("`{}` has nonpositive order", sym.id())));
    }
    let ell = ellipticity_check(&sym, ctx.grid.nyquist().max(2.0))?;
    out.add("ellipticity", "symbol/ellipticity", ell.c_hat, Comparison::Above, 0.0);
    let (k, lambda, u, count) = ctx.ground_state(suite)?;
    out.add(
        "discrete_count",
        "spectral/discrete-spectrum",
        count as f64,
        Comparison::AtLeast,
        1.0,
    );

    let window = ctx.window();
    let fit = decay_fit(&u, FitMode::Polynomial, Some(window))?;
    ctx.record_fit("ground-state/polynomial", &fit);
    out.add(
        "polynomial_order",
        "decay/rapid-decay",
        fit.rate,
        Comparison::AtLeast,
        6.0,
    );
    let short = FitWindow {
        r1: window.r1,
        r2: window.r1 + 0.6 * (window.r2 - window.r1),
    };
    let short_fit = decay_fit(&u, FitMode::Polynomial, Some(short))?;
    ctx.record_fit("ground-state/polynomial-short", &short_fit);
    out.add(
        "window_monotone",
        "decay/rapid-decay",
        fit.rate - short_fit.rate,
        Comparison::AtLeast,
        0.0,
    );

    let weight = ctx.cfg.weight()?;
    let eps = *ctx.cfg.eps_list.last().expect("validated nonempty");
    let main = ctx.main()?;
    let mismatch = similarity_mismatch(&main.op, &main.dec, &weight, eps)?;
    let corr = eigenvector_correspondence_residual(&main.op, &weight, eps, lambda, &u)?;
    let op = main.op.clone();
    out.add(
        "similarity",
        "decay/exact-similarity",
        mismatch,
        Comparison::Below,
        1e-9,
    )
    .note = Some(format!("{weight}, eps = {eps}"));
    out.add(
        "eigenvector_correspondence",
        "decay/eigenvector-correspondence",
        corr,
        Comparison::Below,
        1e-8,
    )
    .note = Some(format!("eigenvalue {k}: {lambda}"));
    let sweep = uniform_bound_sweep(&op, &weight, &ctx.cfg.eps_list)?;
    out.add(
        "uniform_bound",
        "decay/uniform-relative-bound",
        sweep.variation(),
        Comparison::Below,
        3.0,
    )
    .note = Some(weight.to_string());
    ctx.sweeps.push(sweep);
    Ok(())
}

fn thm2_exp_decay(ctx: &mut Context, out: &mut Checks) -> Result<()> {
    let suite = Suite::Thm2ExpDecay;
    let threshold = ctx.threshold(suite)?;
    let (k, lambda, u, count) = ctx.ground_state(suite)?;
    out.add(
        "discrete_count",
        "spectral/discrete-spectrum",
        count as f64,
        Comparison::AtLeast,
        1.0,
    );

    let window = ctx.window();
    let fit = decay_fit(&u, FitMode::Exponential, Some(window))?;
    ctx.record_fit("ground-state/exponential", &fit);
    out.add(
        "decay_rate",
        "decay/exponential-decay",
        fit.rate,
        Comparison::Above,
        0.0,
    );
    out.add(
        "fit_r_squared",
        "decay/exponential-decay",
        fit.r_squared,
        Comparison::Above,
        0.98,
    );

    let fine_grid = refined(&ctx.grid)?;
    let fine_dec = &ctx.refined()?.dec;
    let fine_pair = discrete_spectrum_select(fine_dec, &SpectralWindow::new(threshold, DISCRETE_MARGIN)?)
        .into_iter()
        .next()
        .ok_or_else(|| Error::NotApplicable("no discrete eigenvalue on the refined grid".into()))?;
    let fine_u = GridFunction::new(fine_grid, fine_pair.eigenvector)?;
    let scale = fine_grid.half_length() / ctx.grid.half_length();
    let fine_window = FitWindow {
        r1: window.r1 * scale,
        r2: window.r2 * scale,
    };
    let fine_fit = decay_fit(&fine_u, FitMode::Exponential, Some(fine_window))?;
    ctx.record_fit("ground-state/exponential-refined", &fine_fit);
    out.add(
        "rate_stability",
        "decay/exponential-decay",
        (fine_fit.rate - fit.rate).abs() / fit.rate,
        Comparison::AtMost,
        0.1,
    )
    .note = Some(format!(
        "L = {}, n = {}: {:.4}",
        fine_grid.half_length(),
        fine_grid.points(),
        fine_fit.rate
    ));

    let gap_scale = threshold - lambda;
    let analytic = analytic_eps0(&ctx.symbol);
    let reference = analytic.map_or(gap_scale, |a| a.min(gap_scale));
    out.add(
        "rate_over_scale",
        "decay/exponential-decay",
        fit.rate / reference,
        Comparison::AtLeast,
        1.0,
    )
    .note = Some(format!("reference scale {reference:.4}"));
    let cert = decay_certificate(&u, 0.5 * fit.rate);
    out.add(
        "certificate",
        "decay/exponential-decay",
        cert,
        Comparison::Below,
        f64::MAX,
    )
    .note = Some(format!("eps = {:.4}", 0.5 * fit.rate));

    let exp = WeightFamily::exponential();
    let eps = *ctx.cfg.eps_list.last().expect("validated nonempty");
    let main = ctx.main()?;
    let mismatch = similarity_mismatch(&main.op, &main.dec, &exp, eps)?;
    let proj = conjugated_projector(&main.op, &main.dec, k, &exp, eps)?;
    let op = main.op.clone();
    out.add(
        "similarity",
        "decay/exact-similarity",
        mismatch,
        Comparison::Below,
        1e-9,
    );
    out.add(
        "projector_idempotency",
        "spectral/projector-idempotency",
        proj.idempotency_defect,
        Comparison::Below,
        1e-8,
    );
    out.add(
        "projector_rank",
        "spectral/projector-idempotency",
        (proj.rank as f64 - proj.multiplicity as f64).abs(),
        Comparison::AtMost,
        0.0,
    )
    .note = Some(format!("rank {} multiplicity {}", proj.rank, proj.multiplicity));

    let est = epsilon0_estimate(&ctx.symbol, &op, &exp, &ctx.cfg.eps_list)?;
    out.add(
        "uniform_bound",
        "decay/uniform-relative-bound",
        est.sweep.variation(),
        Comparison::Below,
        3.0,
    )
    .note = Some(exp.to_string());
    ctx.eps0 = Some(Eps0Summary {
        analytic: est.analytic_eps0,
        empirical: est.empirical_eps0,
    });
    ctx.sweeps.push(est.sweep);
    Ok(())
}

fn thm3_relativistic(ctx: &mut Context, out: &mut Checks) -> Result<()> {
    if ctx.symbol.id() != "relativistic" {
        return Err(Error::NotApplicable(format!(
            "suite `{}` needs the relativistic symbol, got `{}`",
            Suite::Thm3Relativistic,
            ctx.symbol.id()
        )));
    }
    let grid = ctx.grid;
    let d = grid.dim();
    out.add(
        "bessel_recurrence",
        "relativistic/bessel-recurrence",
        bessel_recurrence_residual(BesselOrder::for_dimension(d), 200)?,
        Comparison::Below,
        1e-12,
    );

    let reference = Grid::new(1, 40.0, 2048)?;
    let sg = semigroup_checks(1.0, 1.0, &reference)?;
    out.add(
        "kernel_normalization",
        "relativistic/kernel-normalization",
        sg.normalization_residual,
        Comparison::Below,
        1e-5,
    );
    let coarse = semigroup_checks(1.0, 1.0, &Grid::new(1, 40.0, 128)?)?;
    let fine = semigroup_checks(1.0, 1.0, &Grid::new(1, 40.0, 256)?)?;
    out.add(
        "semigroup_refinement",
        "relativistic/semigroup-convolution",
        fine.convolution_residual / coarse.convolution_residual,
        Comparison::Below,
        1.0,
    );
    let a = free_kernel_consistency(1.0, &Grid::new(1, 20.0, 64)?)?;
    let b = free_kernel_consistency(1.0, &Grid::new(1, 20.0, 128)?)?;
    out.add(
        "free_kernel_refinement",
        "spectral/free-kernel-consistency",
        b / a,
        Comparison::Below,
        1.0,
    )
    .note = Some(format!("{a:.3e} -> {b:.3e}"));

    let v = ctx.potential.clone();
    out.add(
        "comparison_positivity",
        "relativistic/comparison-positivity",
        comparison_negativity(&v, &grid, 1.0)?,
        Comparison::AtMost,
        1e-10,
    );

    let unit = Grid::new(1, 30.0, 256)?;
    let k1 = kato_estimate(&vec![1.0; unit.size()], 1.0, &unit)?;
    out.add(
        "kato_normalization",
        "relativistic/kato-normalization",
        (k1 - (1.0 - (-1.0f64).exp())).abs(),
        Comparison::Below,
        1e-6,
    );
    let (_, minus) = v.node_values(&grid)?;
    let w = if minus.iter().any(|&m| m > 0.0) {
        minus
    } else {
        PotentialSpec::parse("bounded_bump")?.node_values(&grid)?.0
    };
    let scan = kato_limit_scan(&w, 1.0, KATO_LEVELS, &grid)?;
    out.add(
        "kato_monotone",
        "relativistic/kato-monotone",
        scan.monotone as u8 as f64,
        Comparison::AtLeast,
        1.0,
    );
    out.add(
        "kato_vanishing",
        "relativistic/kato-monotone",
        scan.log_slope,
        Comparison::Above,
        0.0,
    );
    ctx.kato = Some(scan);

    if let Some(b) = ctx.main()?.form_bound {
        out.0.last_mut().expect("kato checks").note =
            Some(format!("quotient <u, V_- u> / <u, H_0 u> on the grid: {b:.4}"));
    }

    let g = ctx.gauge.clone();
    let seed = ctx.seed_for("diamagnetic");
    let coarse = diamagnetic_check(&g, &v, &grid, 1.0, DIAMAGNETIC_TRIALS, seed)?;
    out.add(
        "diamagnetic",
        "relativistic/diamagnetic",
        coarse.max_violation,
        Comparison::Below,
        1e-2,
    );
    let n = grid.points();
    let finer = if d == 2 { n + n / 3 } else { 2 * n };
    let finer = grid.with_points(finer + finer % 2)?;
    let fine = diamagnetic_check(&g, &v, &finer, 1.0, DIAMAGNETIC_TRIALS, seed)?;
    let trend = if fine.max_violation == 0.0 {
        0.0
    } else {
        fine.max_violation / coarse.max_violation
    };
    out.add(
        "diamagnetic_trend",
        "relativistic/diamagnetic",
        trend,
        Comparison::Below,
        1.0,
    )
    .note = Some(format!(
        "n = {}: {:.3e}, n = {}: {:.3e}",
        n,
        coarse.max_violation,
        finer.points(),
        fine.max_violation
    ));

    let main = ctx.main()?;
    let lambda = main.dec.eigenvalues[0];
    let u = GridFunction::new(grid, main.dec.eigenvector(0))?;
    let chain = pointwise_bound_check(&v, &grid, lambda, &u, 0.1, 2.0)?;
    out.add(
        "kernel_positivity",
        "relativistic/comparison-positivity",
        chain.positivity_margin,
        Comparison::AtLeast,
        0.0,
    );
    out.add(
        "pointwise_chain",
        "relativistic/pointwise-chain",
        chain.chain_margin,
        Comparison::Above,
        0.0,
    )
    .note = Some(format!("C_p = {:.4}", chain.c_p));
    let fine_grid = refined(&grid)?;
    let fine_dec = &ctx.refined()?.dec;
    let fine_u = GridFunction::new(fine_grid, fine_dec.eigenvector(0))?;
    let fine_chain = pointwise_bound_check(&v, &fine_grid, fine_dec.eigenvalues[0], &fine_u, 0.1, 2.0)?;
    out.add(
        "pointwise_chain_refined",
        "relativistic/pointwise-chain",
        fine_chain.chain_margin,
        Comparison::Above,
        0.0,
    )
    .note = Some(format!("C_p = {:.4}", fine_chain.c_p));
    Ok(())
}

fn run_suite(ctx: &mut Context, suite: Suite) -> SuiteOutcome {
    let mut checks = Checks(Vec::new());
    let result = match suite {
        Suite::QuantizeCore => quantize_core(ctx, &mut checks),
        Suite::LemmasWeights => lemmas_weights(ctx, &mut checks),
        Suite::Thm1RapidDecay => thm1_rapid_decay(ctx, &mut checks),
        Suite::Thm2ExpDecay => thm2_exp_decay(ctx, &mut checks),
        Suite::Thm3Relativistic => thm3_relativistic(ctx, &mut checks),
    };
    SuiteOutcome::new(suite, checks.0, result.err().map(|e| e.to_string()))
}

/// The scenario's main operator: the form sum for the relativistic symbol
/// with a potential, the quantized symbol plus potential otherwise.
pub fn build_operator(cfg: &ScenarioConfig) -> Result<OperatorMatrix> {
    let ctx = Context::new(cfg)?;
    Ok(ctx.build(&ctx.grid)?.0)
}

/// Runs one suite by name against a configuration.
pub fn verify_suite(name: &str, cfg: &ScenarioConfig) -> Result<SuiteOutcome> {
    let suite: Suite = name.parse()?;
    let mut ctx = Context::new(cfg)?;
    Ok(run_suite(&mut ctx, suite))
}

/// Runs the selected suites, captures per-suite errors, and writes the
/// report when an output directory is configured.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let start = Instant::now();
    let mut ctx = Context::new(cfg)?;
    let mut report = ScenarioReport::new(cfg.clone());
    for &suite in &cfg.suites {
        let t = Instant::now();
        info!("running suite {suite}");
        let outcome = run_suite(&mut ctx, suite);
        report.timings.insert(suite.name().into(), t.elapsed().as_secs_f64());
        report.push_suite(outcome);
    }
    if cfg.output.save_operator && ctx.main.is_none() {
        if let Err(e) = ctx.main() {
            report.complete = false;
            report.passed = false;
            log::error!("operator assembly failed: {e}");
        }
    }
    if let Some(main) = &ctx.main {
        report
            .operator_hashes
            .insert("main".into(), content_hash(&encode_operator(&main.op)));
        let discrete = match cfg.essential_threshold {
            Some(t) => main
                .dec
                .eigenvalues
                .iter()
                .enumerate()
                .filter(|(_, &l)| l < t - DISCRETE_MARGIN)
                .map(|(k, _)| k)
                .collect(),
            None => Vec::new(),
        };
        report.spectrum = Some(SpectrumSummary {
            size: main.dec.eigenvalues.len(),
            eigenvalues: main.dec.eigenvalues.clone(),
            residuals: main.dec.pair_residuals.clone(),
            essential_threshold: cfg.essential_threshold,
            discrete,
        });
    }
    report.fits = std::mem::take(&mut ctx.fits);
    report.sweeps = std::mem::take(&mut ctx.sweeps);
    report.eps0 = ctx.eps0.take();
    report.kato = ctx.kato.take();
    report.timings.insert("total".into(), start.elapsed().as_secs_f64());
    if let Some(dir) = &cfg.output.dir {
        if cfg.output.save_operator {
            if let Some(main) = &ctx.main {
                save_operator(&main.op, dir.join("operator.mpdo"))?;
            }
        }
        if cfg.output.csv {
            emit_report(&report, ReportFormat::CsvBundle, dir)?;
        }
        emit_report(&report, ReportFormat::Json, dir)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_symbol_quantize_core_passes_quickly() {
        let mut cfg = ScenarioConfig::new("p_s:s=0", 1, 4.0, 64);
        cfg.suites = vec![Suite::QuantizeCore];
        let t = Instant::now();
        let rep = run_scenario(&cfg).unwrap();
        assert!(t.elapsed().as_secs_f64() < 1.0);
        let s = &rep.suites[0];
        assert!(s.passed, "{s:#?}");
        assert!(rep.complete && rep.passed);
    }

    #[test]
    fn odd_grid_fails_before_computation() {
        let cfg = ScenarioConfig::new("relativistic", 1, 8.0, 31);
        assert!(matches!(run_scenario(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_suite_is_a_usage_error() {
        let cfg = ScenarioConfig::new("relativistic", 1, 4.0, 64);
        assert!(matches!(verify_suite("thm9", &cfg), Err(Error::UnknownSuite(_))));
    }

    #[test]
    fn missing_threshold_is_captured_per_suite() {
        let mut cfg = ScenarioConfig::new("kinetic", 1, 4.0, 64);
        cfg.suites = vec![Suite::Thm1RapidDecay, Suite::QuantizeCore];
        let rep = run_scenario(&cfg).unwrap();
        assert!(!rep.complete && !rep.passed);
        assert!(rep.suites[0].error.as_deref().unwrap().contains("essential_threshold"));
        assert!(rep.suites[1].passed, "{:#?}", rep.suites[1]);
    }

    #[test]
    fn seeds_depend_on_purpose_only() {
        let cfg = ScenarioConfig::new("kinetic", 1, 4.0, 64);
        let a = Context::new(&cfg).unwrap();
        let b = Context::new(&cfg).unwrap();
        assert_eq!(a.seed_for("x"), b.seed_for("x"));
        assert_ne!(a.seed_for("x"), a.seed_for("y"));
    }

    #[test]
    fn refined_grid_rounds_to_even() {
        let g = refined(&Grid::new(1, 30.0, 512).unwrap()).unwrap();
        assert_eq!((g.half_length(), g.points()), (40.0, 768));
        let g = refined(&Grid::new(2, 3.0, 10).unwrap()).unwrap();
        assert_eq!(g.points(), 16);
    }
}
