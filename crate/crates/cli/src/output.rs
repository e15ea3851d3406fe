use std::fmt::Write as _;
use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::Formatter;

use seektime_core::report::{
    AnalysisReport, Comparison, McSection, SimulationReport, SpectrumReport, VerificationReport,
};

/// Compact JSON with every float written to 17 significant digits, which
/// round-trips any `f64`. Non-finite values become `null`.
struct Sig17;

impl Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    value.serialize(&mut ser).expect("reports always serialize");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

fn num(x: f64) -> String {
    if x == 0.0 || (1e-4..1e7).contains(&x.abs()) {
        format!("{x:.10}")
    } else {
        format!("{x:.6e}")
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn matrix_table(out: &mut String, title: &str, rows: &[Vec<f64>], labels: &[String]) {
    let _ = writeln!(out, "\n{title}");
    let _ = write!(out, "{:>10}", "");
    for l in labels {
        let _ = write!(out, " {l:>18}");
    }
    out.push('\n');
    for (l, row) in labels.iter().zip(rows) {
        let _ = write!(out, "{l:>10}");
        for &x in row {
            let _ = write!(out, " {:>18}", num(x));
        }
        out.push('\n');
    }
}

pub fn analysis_table(r: &AnalysisReport) -> String {
    let mut out = String::new();
    let c = &r.chain;
    let _ = writeln!(
        out,
        "chain: {} states, irreducible: {}, period: {}",
        c.n,
        yes_no(c.irreducible),
        c.period.map_or("-".into(), |p| p.to_string())
    );
    let k = &r.kemeny;
    let _ = writeln!(out, "\nKemeny constant");
    let _ = writeln!(out, "  trace of Z          {}", num(k.trace));
    let _ = writeln!(out, "  spectral sum        {}", num(k.spectral));
    let _ = writeln!(out, "  mean time to w      {}", num(k.direct));
    let _ = writeln!(
        out,
        "  max discrepancy     {:e} (tolerance {:e}, {})",
        k.max_relative_discrepancy,
        k.tolerance,
        if k.agree { "agree" } else { "DISAGREE" }
    );
    let lb = &r.lower_bound;
    let _ = writeln!(
        out,
        "  lower bound (n-1)/2 {} (slack {}, equality: {})",
        num(lb.floor),
        num(lb.slack),
        yes_no(lb.equality)
    );
    let _ = writeln!(
        out,
        "  spread of M_iw      {:e}",
        r.time_to_equilibrium.spread
    );

    let _ = writeln!(
        out,
        "\n{:>10} {:>18} {:>18} {:>18} {:>18} {:>18} {:>18} {:>18}",
        "state", "w", "M_iw", "M_wj", "mu", "sigma2", "clt_rate", "Z_jj"
    );
    for (j, st) in r.renewal.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:>10} {:>18} {:>18} {:>18} {:>18} {:>18} {:>18} {:>18}",
            c.labels[j],
            num(r.equilibrium[j]),
            num(r.time_to_equilibrium.values[j]),
            num(r.time_from_equilibrium[j]),
            num(st.mu),
            num(st.sigma2),
            num(st.clt_rate),
            num(st.z_diag)
        );
    }
    if let Some(z) = &r.fundamental_matrix {
        matrix_table(&mut out, "fundamental matrix Z", z, &c.labels);
    }
    if let Some(m) = &r.hitting_times {
        matrix_table(&mut out, "mean hitting times M", m, &c.labels);
    }
    if let Some(mc) = &r.monte_carlo {
        mc_table(&mut out, mc);
    }
    if let Some(f) = &r.failure {
        let _ = writeln!(out, "\nFAILURE: {f}");
    }
    out
}

fn comparison_row(out: &mut String, name: &str, c: &Comparison) {
    let _ = writeln!(
        out,
        "  {name:<22} {:>18} {:>18} {:>14} {:>8.3} {}",
        num(c.analytic),
        num(c.estimate.value),
        num(c.estimate.std_error),
        c.z_score,
        if c.agrees { "ok" } else { "MISMATCH" }
    );
}

fn mc_table(out: &mut String, mc: &McSection) {
    let _ = writeln!(
        out,
        "\nMonte Carlo (seed {}, T = {}, {} replicas, target state {})",
        mc.config.seed, mc.config.steps, mc.config.replicas, mc.config.target
    );
    let _ = writeln!(
        out,
        "  {:<22} {:>18} {:>18} {:>14} {:>8}",
        "quantity", "analytic", "estimate", "std error", "z"
    );
    for (name, c) in mc.comparisons() {
        comparison_row(out, name, c);
    }
}

pub fn verification_table(r: &VerificationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<38} {:>16} {:>16}  result",
        "check", "measured", "bound"
    );
    for c in &r.checks {
        let _ = writeln!(
            out,
            "{:<38} {:>16.6e} {:>16.6e}  {}",
            c.name,
            c.residual,
            c.tolerance,
            if c.passed { "pass" } else { "FAIL" }
        );
    }
    let _ = writeln!(
        out,
        "\nlower bound equality: {}; deterministic return times at states {:?}",
        yes_no(r.lower_bound_equality),
        r.bus_equality_states
    );
    if let Some(mc) = &r.monte_carlo {
        mc_table(&mut out, mc);
    }
    let _ = writeln!(
        out,
        "\n{}",
        if r.passed {
            "ALL CHECKS PASSED"
        } else {
            "VERIFICATION FAILED"
        }
    );
    out
}

pub fn spectrum_table(r: &SpectrumReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>5} {:>22} {:>22}", "k", "Re alpha_k", "Im alpha_k");
    for (k, a) in r.eigenvalues.iter().enumerate() {
        let _ = writeln!(out, "{k:>5} {:>22.15} {:>22.15}", a.re, a.im);
    }
    let _ = writeln!(out, "\nK (spectral)       {}", num(r.kemeny_spectral));
    let _ = writeln!(out, "imaginary residue  {:e}", r.residual_imag);
    let _ = writeln!(out, "spectral radius    {}", num(r.spectral_radius));
    if let Some(m) = r.min_resolvent_real_part {
        let _ = writeln!(out, "min Re 1/(1-alpha) {}", num(m));
    }
    out
}

pub fn simulation_table(r: &SimulationReport) -> String {
    let mut out = String::new();
    let c = &r.config;
    let _ = writeln!(
        out,
        "seed {}, T = {}, {} replicas, burn-in {}",
        c.seed, c.steps, c.replicas, c.burn_in
    );
    if let Some(t) = &r.target {
        let _ = writeln!(out, "\ntarget state {} ({})", t.label, t.state);
        let _ = writeln!(
            out,
            "  visit count mean      {} +- {} (CLT {})",
            num(t.visits.mean.value),
            num(t.visits.mean.std_error),
            num(t.clt.mean)
        );
        let _ = writeln!(
            out,
            "  visit count variance  {} +- {} (CLT {})",
            num(t.visits.variance.value),
            num(t.visits.variance.std_error),
            num(t.clt.variance)
        );
        let _ = writeln!(
            out,
            "  return time mean      {} +- {} (mu {})",
            num(t.return_time.mean.value),
            num(t.return_time.mean.std_error),
            num(t.renewal.mu)
        );
        let _ = writeln!(
            out,
            "  return time variance  {} +- {} (sigma2 {})",
            num(t.return_time.variance.value),
            num(t.return_time.variance.std_error),
            num(t.renewal.sigma2)
        );
    }
    if let Some(k) = &r.kemeny {
        let _ = writeln!(
            out,
            "\nKemeny constant       {} +- {} (analytic {})",
            num(k.estimate.value),
            num(k.estimate.std_error),
            num(k.analytic)
        );
    }
    out
}
