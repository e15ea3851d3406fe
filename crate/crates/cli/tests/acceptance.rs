//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always shown:
//! `cargo test -p seektime-cli --test acceptance`.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seektime_core::generate::{cycle, dirichlet_chain, two_state, uniform};
use seektime_core::renewal::{
    bus_floor, expected_renewal_count, interarrival_stats, sigma2_from_tau, z_diag_from_moments,
    InterarrivalDistribution,
};
use seektime_core::resolvent::harmonic_residual;
use seektime_core::{Analysis, SimulationConfig, Simulator, StochasticMatrix};

const CHAINS: usize = 1000;
const SEED: u64 = 20_240_601;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

struct Corpus {
    analyses: Vec<Analysis>,
    elapsed: Duration,
}

fn corpus() -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let start = Instant::now();
    let analyses = (0..CHAINS)
        .map(|_| {
            let n = rng.random_range(2..=50);
            let p = dirichlet_chain(n, &mut rng);
            Analysis::run(&p).expect("random Dirichlet chains are irreducible")
        })
        .collect();
    Corpus {
        analyses,
        elapsed: start.elapsed(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn scale(a: &Analysis) -> f64 {
    a.kemeny_trace.abs().max(1.0)
}

fn three_methods(c: &Corpus) -> Outcome {
    let worst = c
        .analyses
        .iter()
        .map(|a| {
            let k = a.kemeny_trace;
            let d = (k - a.spectral_kemeny.kemeny)
                .abs()
                .max((k - a.seek.kemeny).abs());
            d / scale(a)
        })
        .fold(0.0, f64::max);
    let secs = c.elapsed.as_secs_f64();
    Outcome::new(
        worst <= 1e-7 && secs < 30.0,
        format!("worst |dK|/max(1,K) = {worst:.2e} (bound 1e-7); {CHAINS} chains in {secs:.2} s (bound 30 s)"),
    )
}

fn constancy(c: &Corpus) -> Outcome {
    let worst = c
        .analyses
        .iter()
        .map(|a| a.seek.constancy_spread / scale(a))
        .fold(0.0, f64::max);
    Outcome::new(
        worst <= 1e-8,
        format!("worst spread/max(1,K) = {worst:.2e} (bound 1e-8)"),
    )
}

fn harmonic(c: &Corpus) -> Outcome {
    let worst = c
        .analyses
        .iter()
        .map(|a| harmonic_residual(&a.chain, &a.seek.to_equilibrium) / scale(a))
        .fold(0.0, f64::max);
    Outcome::new(
        worst <= 1e-8,
        format!("worst |P m - m|_inf/max(1,K) = {worst:.2e} (bound 1e-8)"),
    )
}

fn anchors() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |what: &str, ok: bool| {
        if !ok {
            failures.push(what.to_string());
        }
    };

    let a = Analysis::run(&two_state(0.2, 0.4)).unwrap();
    check("two-state K", rel(a.kemeny_trace, 5.0 / 3.0) <= 1e-12);
    check(
        "two-state spectral K",
        rel(a.spectral_kemeny.kemeny, 5.0 / 3.0) <= 1e-12,
    );
    check("two-state direct K", rel(a.seek.kemeny, 5.0 / 3.0) <= 1e-12);
    check(
        "two-state w",
        rel(a.equilibrium.get(0), 2.0 / 3.0) <= 1e-12
            && rel(a.equilibrium.get(1), 1.0 / 3.0) <= 1e-12,
    );
    check(
        "two-state M",
        a.hitting.get(0, 0) == 0.0
            && a.hitting.get(1, 1) == 0.0
            && rel(a.hitting.get(0, 1), 5.0) <= 1e-12
            && rel(a.hitting.get(1, 0), 2.5) <= 1e-12,
    );
    check(
        "two-state Z diagonal",
        rel(a.fundamental.diag(0), 5.0 / 9.0) <= 1e-12
            && rel(a.fundamental.diag(1), 10.0 / 9.0) <= 1e-12,
    );

    let a = Analysis::run(&cycle(3)).unwrap();
    check("3-cycle K", (a.kemeny_trace - 1.0).abs() <= 1e-12);
    check("3-cycle equality flag", a.lower_bound.equality);

    for n in [2usize, 5, 10] {
        let a = Analysis::run(&uniform(n)).unwrap();
        check(
            &format!("uniform n={n}"),
            (a.kemeny_trace - (n as f64 - 1.0)).abs() <= 1e-10,
        );
    }
    let passed = failures.is_empty();
    Outcome::new(
        passed,
        if passed {
            "two-state, 3-cycle and uniform n in {2,5,10} match closed forms".into()
        } else {
            format!("mismatched: {}", failures.join(", "))
        },
    )
}

fn resolvent_structure(c: &Corpus) -> Outcome {
    let (mut sums, mut dominance, mut diagonal) = (0.0f64, f64::INFINITY, f64::INFINITY);
    for a in &c.analyses {
        let z = &a.fundamental;
        sums = sums
            .max(z.row_sum_residual())
            .max(z.weighted_column_residual(&a.equilibrium));
        dominance = dominance.min(z.min_dominance_gap());
        diagonal = diagonal.min(z.min_diagonal_slack(&a.equilibrium));
    }
    Outcome::new(
        sums <= 1e-9 && dominance >= -1e-12 && diagonal >= -1e-9,
        format!(
            "row/column sums {sums:.2e} (bound 1e-9); min Z_jj - Z_ij {dominance:.2e} (>= -1e-12); \
             min Z_jj - (1-w_j)/2 {diagonal:.2e} (>= -1e-9)"
        ),
    )
}

fn lower_bound(c: &Corpus) -> Outcome {
    let min_slack = c
        .analyses
        .iter()
        .map(|a| a.lower_bound.slack)
        .fold(f64::INFINITY, f64::min);
    let cycle_gap = (2..=10)
        .map(|n| Analysis::run(&cycle(n)).unwrap().lower_bound.slack.abs())
        .fold(0.0, f64::max);
    Outcome::new(
        min_slack >= -1e-9 && cycle_gap <= 1e-9,
        format!("min K - (n-1)/2 = {min_slack:.3} (>= -1e-9); worst cycle |slack| n=2..10 = {cycle_gap:.2e} (bound 1e-9)"),
    )
}

fn bus_equality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 7);
    let (mut worst, mut below_floor, mut tight_non_point) = (0.0f64, 0usize, 0usize);
    for _ in 0..200 {
        let k = rng.random_range(1..=10);
        let weights = (0..k)
            .map(|_| (rng.random_range(1..=100u64), rng.random::<f64>() + 1e-3))
            .collect();
        let dist = InterarrivalDistribution::from_weights(weights).unwrap();
        let s = interarrival_stats(&dist).unwrap();
        worst = worst.max(rel(s.tau, s.tau_bus));
        let slack = s.tau - bus_floor(s.mu);
        below_floor += (slack < 0.0 && slack.abs() > 1e-12 * s.mu) as usize;
        let point = s.sigma2 == 0.0;
        tight_non_point += (!point && slack <= 1e-12 * s.mu) as usize;
    }
    let mut loose_point = 0usize;
    for n in 1..=50 {
        let s = interarrival_stats(&InterarrivalDistribution::point_mass(n).unwrap()).unwrap();
        loose_point += (s.tau != bus_floor(s.mu)) as usize;
    }
    Outcome::new(
        worst <= 1e-12 && below_floor == 0 && tight_non_point == 0 && loose_point == 0,
        format!(
            "200 laws: worst rel |tau - tau_bus| = {worst:.2e} (bound 1e-12), {below_floor} below floor; \
             equality on 50/50 point masses ({loose_point} misses), {tight_non_point} spurious"
        ),
    )
}

fn renewal_round_trips(c: &Corpus) -> Outcome {
    let (mut sigma, mut zdiag, mut rate) = (0.0f64, 0.0f64, 0.0f64);
    for a in &c.analyses {
        let n = a.n();
        for s in &a.renewal {
            let j = s.state;
            let w = a.equilibrium.get(j);
            // Mean wait from equilibrium, taken from M rather than Z.
            let tau: f64 = (0..n)
                .map(|i| a.equilibrium.get(i) * a.hitting.get(i, j))
                .sum();
            sigma = sigma.max(rel(sigma2_from_tau(s.mu, tau), s.sigma2));
            zdiag = zdiag.max(rel(z_diag_from_moments(s.mu, s.sigma2).unwrap(), s.z_diag));
            let lhs = s.sigma2 / s.mu.powi(3);
            let rhs = 2.0 * s.z_diag * w + w * w - w;
            rate = rate.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(w));
        }
    }
    Outcome::new(
        sigma <= 1e-12 && zdiag <= 1e-12 && rate <= 1e-10,
        format!("sigma2 {sigma:.2e}, Z_jj {zdiag:.2e} (bound 1e-12); sigma2/mu^3 {rate:.2e} (bound 1e-10)"),
    )
}

fn monte_carlo() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut passed = true;

    let p = uniform(2);
    let w = seektime_core::stationary_distribution(&p).unwrap();
    let cfg = SimulationConfig::new(101, 10_000, 1000).unwrap();
    let v = Simulator::new(&p).simulate_visits(&w, 0, &cfg).unwrap();
    let z = (v.mean.value - 5000.0).abs() / v.mean.std_error;
    let var = rel(v.variance.value, 2500.0);
    passed &= z <= 3.0 && var <= 0.1;
    notes.push(format!(
        "uniform mean z = {z:.2}, variance off {:.1}%",
        100.0 * var
    ));

    let p = two_state(0.2, 0.4);
    let w = seektime_core::stationary_distribution(&p).unwrap();
    let sim = Simulator::new(&p);
    let cfg = SimulationConfig::new(102, 27_000, 1000).unwrap();
    let v = sim.simulate_visits(&w, 1, &cfg).unwrap();
    let var = rel(v.variance.value, 14000.0);
    passed &= var <= 0.1;
    notes.push(format!("two-state variance off {:.1}%", 100.0 * var));

    let k = sim.estimate_kemeny(&w, 100_000, 103).unwrap();
    let z = (k.value - 5.0 / 3.0).abs() / k.std_error;
    passed &= z <= 3.0;
    notes.push(format!("K z = {z:.2}"));

    let secs = start.elapsed().as_secs_f64();
    passed &= secs < 60.0;
    notes.push(format!("{secs:.2} s (bound 60 s)"));
    Outcome::new(passed, notes.join("; "))
}

fn feller() -> Outcome {
    let p = uniform(2);
    let a = Analysis::run(&p).unwrap();
    let s = &a.renewal[0];
    let formula = expected_renewal_count(s.mu, s.sigma2, 10_000).unwrap().mean;
    let cfg = SimulationConfig::new(104, 10_000, 100_000).unwrap();
    let counts = Simulator::new(&p).simulate_renewal_counts(0, &cfg).unwrap();
    let gap = (counts.mean.value - formula).abs();
    Outcome::new(
        gap <= 0.5,
        format!(
            "E N(10^4) = {:.3} +- {:.3} vs formula {formula:.3}; gap {gap:.3} (bound 0.5)",
            counts.mean.value, counts.mean.std_error
        ),
    )
}

fn write_chain(dir: &Path, name: &str, p: &StochasticMatrix) -> PathBuf {
    let path = dir.join(name);
    let mut file = std::io::BufWriter::new(std::fs::File::create(&path).unwrap());
    for row in p.to_rows() {
        let line: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
        writeln!(file, "{}", line.join(",")).unwrap();
    }
    path
}

fn seektime(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_seektime"))
        .args(args)
        .env_remove("SEEKTIME_TOL")
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn performance() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 11);
    let mut notes = Vec::new();
    let mut passed = true;
    for (n, bound) in [(500usize, 10.0f64), (100, 0.5)] {
        let path = write_chain(
            dir.path(),
            &format!("dense{n}.csv"),
            &dirichlet_chain(n, &mut rng),
        );
        let start = Instant::now();
        let (code, _) = seektime(&["analyze", path.to_str().unwrap()]);
        let secs = start.elapsed().as_secs_f64();
        passed &= code == 0 && secs < bound;
        notes.push(format!(
            "n = {n}: {secs:.3} s (bound {bound} s, exit {code})"
        ));
    }
    Outcome::new(passed, notes.join("; "))
}

fn determinism() -> Outcome {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let file = |name: &str| data.join(name).to_str().unwrap().to_string();
    let (two, cycle3, uniform2) = (
        file("two_state.json"),
        file("cycle3.csv"),
        file("uniform2.csv"),
    );
    let commands: Vec<Vec<&str>> = vec![
        vec!["analyze", &two],
        vec!["analyze", &cycle3],
        vec![
            "verify",
            &two,
            "--mc",
            "--replicas",
            "100000",
            "--seed",
            "42",
        ],
        vec!["verify", &cycle3],
        vec!["verify", &uniform2],
        vec![
            "simulate",
            &two,
            "--kemeny",
            "--replicas",
            "100000",
            "--seed",
            "7",
        ],
        vec![
            "simulate",
            &cycle3,
            "--target",
            "s0",
            "--steps",
            "300",
            "--replicas",
            "10",
        ],
        vec![
            "simulate",
            &two,
            "--target",
            "b",
            "--steps",
            "27000",
            "--replicas",
            "1000",
            "--seed",
            "1",
        ],
        vec!["spectrum", &two],
    ];
    let mut differing = Vec::new();
    for args in &commands {
        let (c1, first) = seektime(args);
        let (c2, second) = seektime(args);
        if c1 != 0 || c2 != 0 || first != second || first.is_empty() {
            differing.push(args[0..2].join(" "));
        }
    }
    Outcome::new(
        differing.is_empty(),
        format!(
            "{} commands run twice; {} differ {:?}",
            commands.len(),
            differing.len(),
            differing
        ),
    )
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() -> ExitCode {
    let corpus = corpus();
    let criteria: Vec<Criterion> = vec![
        (
            "three-method agreement",
            Box::new(|| three_methods(&corpus)),
        ),
        ("constancy of M_iw", Box::new(|| constancy(&corpus))),
        ("harmonic property", Box::new(|| harmonic(&corpus))),
        ("closed-form anchors", Box::new(anchors)),
        (
            "resolvent structure",
            Box::new(|| resolvent_structure(&corpus)),
        ),
        ("lower bound", Box::new(|| lower_bound(&corpus))),
        ("bus equality", Box::new(bus_equality)),
        (
            "renewal round trips",
            Box::new(|| renewal_round_trips(&corpus)),
        ),
        ("Monte Carlo oracle", Box::new(monte_carlo)),
        ("Feller approximation", Box::new(feller)),
        ("scale/performance", Box::new(performance)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = run();
        let tag = if outcome.passed { "PASS" } else { "FAIL" };
        println!("{tag} {:>2} {name:<24} {}", k + 1, outcome.detail);
        if !outcome.passed {
            failed.push(k + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
