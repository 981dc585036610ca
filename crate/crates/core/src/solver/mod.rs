//! Successive inner approximation for the joint power allocation.
//!
//! The sum rate `sum_k R_sd^k + min(R_sr^k, R_rd^k)` is written in epigraph
//! form with variables `t` bounding the relay path from below. Every rate is
//! replaced by its concave lower bound around the current allocation, the
//! resulting convex program is solved with a dense log-barrier method
//! ([`interior`]), and the solution becomes the next anchor. Each bound is
//! tight at its anchor, so the true objective never decreases, and a fixed
//! point satisfies the KKT conditions of the original problem.

pub mod interior;

use nalgebra::{DMatrix, DVector};

use crate::channel::SystemConfig;
use crate::distortion::RateCoefficients;
use crate::error::{Error, Result};
use crate::rates::{LinkSet, PowerAllocation, PowerBlock, SurrogateTerm};
use interior::{ConvexProgram, FirstOrder, IpmSettings};

pub use interior::KktResidual;

/// How the `min(R_sr, R_rd)` terms are linearized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Epigraph {
    /// One `t_k` per subcarrier; exact epigraph of `sum_k min(R_sr^k, R_rd^k)`.
    #[default]
    PerSubcarrier,
    /// A single `t` shared by all subcarriers, objective `sum_k R_sd^k + t`.
    Common,
}

/// How the next anchor is chosen from the surrogate solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reanchor {
    /// Next anchor is the surrogate solution.
    Plain,
    /// Squared extrapolation: two plain steps, an extrapolated anchor built
    /// from them, and a fallback to the second plain step whenever the
    /// extrapolated one is worse. One outer iteration costs three solves.
    #[default]
    Squarem,
}

/// Initial points of the outer iteration; the best final objective wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Starts {
    /// Equal power on every subcarrier and stream.
    #[default]
    Uniform,
    /// Uniform, plus every assignment of each subcarrier's source power
    /// wholly to the direct or wholly to the relayed stream: `2^K + 1` runs.
    Patterns,
}

impl std::str::FromStr for Starts {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(Starts::Uniform),
            "patterns" => Ok(Starts::Patterns),
            _ => Err(Error::InvalidConfig(format!("starts: expected \"uniform\" or \"patterns\", got {s:?}"))),
        }
    }
}

impl std::str::FromStr for Reanchor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plain" => Ok(Reanchor::Plain),
            "squarem" => Ok(Reanchor::Squarem),
            _ => Err(Error::InvalidConfig(format!("reanchor: expected \"plain\" or \"squarem\", got {s:?}"))),
        }
    }
}

/// `Starts::Patterns` refuses more subcarriers than this.
pub const MAX_PATTERN_SUBCARRIERS: usize = 10;

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub max_outer_iters: usize,
    /// Stop once the true objective improves by less than this (bits/s/Hz).
    pub outer_tol: f64,
    /// KKT residual and duality gap required of every inner solve.
    pub inner_tol: f64,
    pub max_inner_iters: usize,
    pub barrier_growth: f64,
    pub line_search_alpha: f64,
    pub line_search_beta: f64,
    /// Lower bound on every optimized power, keeping logarithms finite.
    pub power_floor: f64,
    pub epigraph: Epigraph,
    pub reanchor: Reanchor,
    pub starts: Starts,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_outer_iters: 50,
            outer_tol: 1e-6,
            inner_tol: 1e-8,
            max_inner_iters: 200,
            barrier_growth: 10.0,
            line_search_alpha: 0.01,
            line_search_beta: 0.5,
            power_floor: 1e-12,
            epigraph: Epigraph::PerSubcarrier,
            reanchor: Reanchor::Squarem,
            starts: Starts::Uniform,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("outer_tol", self.outer_tol),
            ("inner_tol", self.inner_tol),
            ("power_floor", self.power_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be > 0")));
            }
        }
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return Err(Error::InvalidConfig("iteration limits must be >= 1".into()));
        }
        if self.barrier_growth <= 1.0 {
            return Err(Error::InvalidConfig("barrier_growth must exceed 1".into()));
        }
        if !(0.0 < self.line_search_alpha && self.line_search_alpha < 0.5)
            || !(0.0 < self.line_search_beta && self.line_search_beta < 1.0)
        {
            return Err(Error::InvalidConfig("line search parameters out of range".into()));
        }
        Ok(())
    }

    fn ipm(&self) -> IpmSettings {
        IpmSettings {
            tol: self.inner_tol,
            max_iters: self.max_inner_iters,
            mu: self.barrier_growth,
            alpha: self.line_search_alpha,
            beta: self.line_search_beta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// True-objective change fell below `outer_tol`.
    Converged,
    MaxIterations,
    /// Nothing to optimize (for example a zero power budget).
    Trivial,
}

#[derive(Debug, Clone)]
pub struct SolveTrace {
    /// Optimal surrogate objective of each inner solve.
    pub surrogate_objectives: Vec<f64>,
    /// True epigraph objective; entry 0 is the initial allocation, entry `a`
    /// the iterate after outer iteration `a`.
    pub true_objectives: Vec<f64>,
    /// `sum_k R^k` at the returned allocation.
    pub final_sum_rate: f64,
    pub iterations: usize,
    /// Surrogate programs solved; exceeds `iterations` under acceleration.
    pub surrogate_solves: usize,
    pub inner_iterations: Vec<usize>,
    pub inner_kkt: Vec<KktResidual>,
    /// KKT residual of the exact (non-surrogate) problem at the returned
    /// point, with the last inner solve's multipliers re-fitted to the
    /// exact gradients.
    pub true_kkt: KktResidual,
    pub termination: Termination,
}

/// Result of one surrogate solve.
#[derive(Debug, Clone)]
pub struct SurrogateSolution {
    pub powers: PowerAllocation,
    pub objective: f64,
    pub kkt: KktResidual,
    pub iterations: usize,
    lambda: DVector<f64>,
    x: DVector<f64>,
}

/// A power allocation problem over a fixed set of rate coefficients.
/// Disabled paths have their powers frozen at zero.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    links: &'a LinkSet,
    power_source: f64,
    power_relay: f64,
    relay_path: bool,
    direct_path: bool,
    epigraph: Epigraph,
}

impl<'a> Problem<'a> {
    fn build(links: &'a LinkSet, config: &SystemConfig, relay: bool, direct: bool) -> Self {
        let source_ok = config.power_source > 0.0;
        Self {
            links,
            power_source: config.power_source,
            power_relay: config.power_relay,
            relay_path: relay && source_ok && config.power_relay > 0.0,
            direct_path: direct && source_ok,
            epigraph: Epigraph::PerSubcarrier,
        }
    }

    /// Both streams: direct link plus decode-and-forward relay path.
    pub fn rate_splitting(links: &'a LinkSet, config: &SystemConfig) -> Self {
        Self::build(links, config, true, true)
    }

    /// Direct link only; relay powers frozen at zero.
    pub fn direct_only(links: &'a LinkSet, config: &SystemConfig) -> Self {
        Self::build(links, config, false, true)
    }

    /// Relay path only; direct-stream power frozen at zero.
    pub fn relay_only(links: &'a LinkSet, config: &SystemConfig) -> Self {
        Self::build(links, config, true, false)
    }

    pub fn with_epigraph(mut self, epigraph: Epigraph) -> Self {
        self.epigraph = epigraph;
        self
    }

    pub fn links(&self) -> &LinkSet {
        self.links
    }

    fn k(&self) -> usize {
        self.links.num_subcarriers()
    }

    fn num_t(&self) -> usize {
        match (self.relay_path, self.epigraph) {
            (false, _) => 0,
            (true, Epigraph::PerSubcarrier) => self.k(),
            (true, Epigraph::Common) => 1,
        }
    }

    fn t_index(&self, k: usize) -> usize {
        match self.epigraph {
            Epigraph::PerSubcarrier => k,
            Epigraph::Common => 0,
        }
    }

    /// Equal split over the enabled streams.
    pub fn initial_allocation(&self) -> PowerAllocation {
        let k = self.k();
        let kf = k as f64;
        let mut p = PowerAllocation::zeros(k);
        match (self.relay_path, self.direct_path) {
            (true, true) => p = PowerAllocation::uniform(k, self.power_source, self.power_relay),
            (true, false) => {
                p.p_sr = vec![self.power_source / kf; k];
                p.p_rd = vec![self.power_relay / kf; k];
            }
            (false, true) => p.p_sd = vec![self.power_source / kf; k],
            (false, false) => {}
        }
        p.t = vec![0.0; self.num_t()];
        p
    }

    /// Epigraph objective at `p` with the tightest feasible `t`.
    pub fn true_objective(&self, p: &PowerAllocation) -> f64 {
        let prelog = self.links.prelog;
        let mut obj = 0.0;
        if self.direct_path {
            obj += self.links.sd.rate(p, prelog).iter().sum::<f64>();
        }
        if self.relay_path {
            obj += self.tightest_t(p).iter().sum::<f64>();
        }
        obj
    }

    fn tightest_t(&self, p: &PowerAllocation) -> Vec<f64> {
        let prelog = self.links.prelog;
        let sr = self.links.sr.rate(p, prelog);
        let rd = self.links.rd.rate(p, prelog);
        let mut t = vec![f64::INFINITY; self.num_t()];
        for k in 0..self.k() {
            let j = self.t_index(k);
            t[j] = t[j].min(sr[k].min(rd[k]));
        }
        t
    }

    fn layout(&self, opts: &SolverOptions) -> Layout {
        let k = self.k();
        let mut vars = Vec::new();
        let blocks: &[PowerBlock] = match (self.relay_path, self.direct_path) {
            (true, true) => &[PowerBlock::Sr, PowerBlock::Sd, PowerBlock::Rd],
            (true, false) => &[PowerBlock::Sr, PowerBlock::Rd],
            (false, true) => &[PowerBlock::Sd],
            (false, false) => &[],
        };
        for &b in blocks {
            for sc in 0..k {
                vars.push((b, sc));
            }
        }
        let n_source = vars.iter().filter(|(b, _)| *b != PowerBlock::Rd).count().max(1) as f64;
        let n_relay = vars.iter().filter(|(b, _)| *b == PowerBlock::Rd).count().max(1) as f64;
        let floors = vars
            .iter()
            .map(|(b, _)| {
                let share = match b {
                    PowerBlock::Rd => self.power_relay / n_relay,
                    _ => self.power_source / n_source,
                };
                opts.power_floor.min(1e-6 * share)
            })
            .collect();
        let mut pos = vec![None; 3 * k];
        for (j, (b, sc)) in vars.iter().enumerate() {
            pos[b.offset(k) + sc] = Some(j);
        }
        Layout { k, vars, pos, floors, n_t: self.num_t() }
    }

    fn constraints(&self, layout: &Layout) -> Vec<Constraint> {
        let mut cons = Vec::new();
        if self.relay_path {
            cons.extend((0..layout.k).map(Constraint::HopSr));
            cons.extend((0..layout.k).map(Constraint::HopRd));
            cons.push(Constraint::RelayBudget);
        }
        if layout.vars.iter().any(|(b, _)| *b != PowerBlock::Rd) {
            cons.push(Constraint::SourceBudget);
        }
        cons.extend((0..layout.vars.len()).map(Constraint::Floor));
        cons
    }

    fn anchor_data(&self, anchor: &PowerAllocation) -> Result<AnchorData> {
        if anchor.p_sr.len() != self.k() || anchor.p_sd.len() != self.k() || anchor.p_rd.len() != self.k() {
            return Err(Error::DimensionMismatch {
                what: "anchor",
                expected: self.k(),
                got: anchor.p_sr.len(),
            });
        }
        let all = anchor.p_sr.iter().chain(&anchor.p_sd).chain(&anchor.p_rd);
        if all.clone().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InfeasibleAnchor("negative or non-finite power".into()));
        }
        let tol = 1e-9 * (1.0 + self.power_source.max(self.power_relay));
        if !anchor.is_feasible(self.power_source, self.power_relay, tol) {
            return Err(Error::InfeasibleAnchor(format!(
                "budgets exceeded: source {} > {} or relay {} > {}",
                anchor.source_total(),
                self.power_source,
                anchor.relay_total(),
                self.power_relay
            )));
        }
        let frozen = self.freeze(anchor);
        Ok(AnchorData {
            i_sr: if self.relay_path { self.links.sr.anchor_interferences(&frozen)? } else { Vec::new() },
            i_rd: if self.relay_path { self.links.rd.anchor_interferences(&frozen)? } else { Vec::new() },
            i_sd: if self.direct_path { self.links.sd.anchor_interferences(&frozen)? } else { Vec::new() },
            powers: frozen,
        })
    }

    /// Copy of `p` with disabled streams set to zero.
    fn freeze(&self, p: &PowerAllocation) -> PowerAllocation {
        let mut q = p.clone();
        if !self.relay_path {
            q.p_sr.iter_mut().for_each(|x| *x = 0.0);
            q.p_rd.iter_mut().for_each(|x| *x = 0.0);
        }
        if !self.direct_path {
            q.p_sd.iter_mut().for_each(|x| *x = 0.0);
        }
        q
    }

    /// Solve the concave surrogate around `anchor` to `opts.inner_tol`.
    pub fn solve_surrogate(&self, anchor: &PowerAllocation, opts: &SolverOptions) -> Result<SurrogateSolution> {
        opts.validate()?;
        let data = self.anchor_data(anchor)?;
        let layout = self.layout(opts);
        let constraints = self.constraints(&layout);
        let program = SurrogateProgram { problem: self, layout: &layout, constraints: &constraints, anchor: &data };
        let x0 = program.start_point(&data.powers);
        let sol = interior::solve(&program, x0, &opts.ipm())
            .ok_or_else(|| Error::InfeasibleAnchor("could not build a strictly feasible start".into()))?;
        let powers = layout.powers(&sol.x);
        if !sol.converged {
            return Err(Error::InnerNotConverged {
                iterations: sol.iterations,
                residual: sol.residual,
                best: Box::new(powers),
            });
        }
        Ok(SurrogateSolution {
            powers,
            objective: -sol.objective,
            kkt: sol.residual,
            iterations: sol.iterations,
            lambda: sol.lambda,
            x: sol.x,
        })
    }

    /// KKT residual of the exact problem at the primal-dual pair of `sol`.
    pub fn true_kkt(&self, sol: &SurrogateSolution, opts: &SolverOptions) -> KktResidual {
        let layout = self.layout(opts);
        let constraints = self.constraints(&layout);
        let eval = exact_first_order(self, &layout, &constraints, &sol.x);
        KktResidual::of(&eval, &interior::fit_duals(&eval, sol.lambda.clone()))
    }

    /// Clip to the floors and scale each budget block back inside its budget.
    fn clamp_feasible(&self, layout: &Layout, mut v: DVector<f64>) -> DVector<f64> {
        for j in 0..layout.vars.len() {
            v[j] = v[j].max(layout.floors[j]);
        }
        for (relay, budget) in [(false, self.power_source), (true, self.power_relay)] {
            let zero = DVector::zeros(v.len());
            let (used, _) = layout.block_sums(&v, &zero, relay);
            if used > budget {
                let scale = budget / used * (1.0 - 1e-12);
                for (j, (b, _)) in layout.vars.iter().enumerate() {
                    if (*b == PowerBlock::Rd) == relay {
                        v[j] = (v[j] * scale).max(layout.floors[j]);
                    }
                }
            }
        }
        v
    }

    /// Run the successive inner approximation from the equal-power start.
    /// Start points for `kind`. Patterns apply only when both paths are open.
    pub fn starts(&self, kind: Starts) -> Result<Vec<PowerAllocation>> {
        let mut out = vec![self.initial_allocation()];
        if kind == Starts::Uniform || !(self.relay_path && self.direct_path) {
            return Ok(out);
        }
        let k = self.k();
        if k > MAX_PATTERN_SUBCARRIERS {
            return Err(Error::InvalidConfig(format!(
                "pattern starts support at most {MAX_PATTERN_SUBCARRIERS} subcarriers, got {k}"
            )));
        }
        let share = self.power_source / k as f64;
        for mask in 0..1usize << k {
            let relayed = |s: usize| mask >> s & 1 == 1;
            let mut p = self.initial_allocation();
            p.p_sr = (0..k).map(|s| if relayed(s) { share } else { 0.0 }).collect();
            p.p_sd = (0..k).map(|s| if relayed(s) { 0.0 } else { share }).collect();
            out.push(p);
        }
        Ok(out)
    }

    /// Run the successive inner approximation from every start of
    /// `opts.starts`, returning the run with the largest final sum rate.
    pub fn sia(&self, opts: &SolverOptions) -> Result<(PowerAllocation, SolveTrace)> {
        let mut best: Option<(PowerAllocation, SolveTrace)> = None;
        for start in self.starts(opts.starts)? {
            let run = self.sia_from(&start, opts)?;
            if best.as_ref().is_none_or(|b| run.1.final_sum_rate > b.1.final_sum_rate) {
                best = Some(run);
            }
        }
        Ok(best.expect("at least one start"))
    }

    /// Run the successive inner approximation from a given feasible start.
    pub fn sia_from(&self, init: &PowerAllocation, opts: &SolverOptions) -> Result<(PowerAllocation, SolveTrace)> {
        opts.validate()?;
        let anchor = self.freeze(init);
        let mut trace = SolveTrace {
            surrogate_objectives: Vec::new(),
            true_objectives: vec![self.true_objective(&anchor)],
            final_sum_rate: 0.0,
            iterations: 0,
            surrogate_solves: 0,
            inner_iterations: Vec::new(),
            inner_kkt: Vec::new(),
            true_kkt: KktResidual::default(),
            termination: Termination::Trivial,
        };
        if !self.relay_path && !self.direct_path {
            let mut p = PowerAllocation::zeros(self.k());
            p.t = Vec::new();
            trace.final_sum_rate = self.links.evaluate(&p).r_total;
            return Ok((p, trace));
        }

        trace.termination = Termination::MaxIterations;
        let layout = self.layout(opts);
        let solve = |a: &PowerAllocation, iteration, trace: &mut SolveTrace| {
            trace.surrogate_solves += 1;
            let s = self
                .solve_surrogate(a, opts)
                .map_err(|e| Error::Outer { iteration, source: Box::new(e) })?;
            trace.inner_iterations.push(s.iterations);
            Ok::<_, Error>(s)
        };
        let mut sol = solve(&anchor, 1, &mut trace)?;
        for iteration in 1..=opts.max_outer_iters {
            if iteration > 1 {
                sol = match opts.reanchor {
                    Reanchor::Plain => solve(&sol.powers, iteration, &mut trace)?,
                    Reanchor::Squarem => {
                        let s1 = solve(&sol.powers, iteration, &mut trace)?;
                        let s2 = solve(&s1.powers, iteration, &mut trace)?;
                        let x0 = layout.power_vec(&sol.powers);
                        let r = layout.power_vec(&s1.powers) - &x0;
                        let v = layout.power_vec(&s2.powers) - &x0 - &r * 2.0;
                        let alpha = if v.norm() > 0.0 { -(r.norm() / v.norm()).max(1.0) } else { -1.0 };
                        let y = self.clamp_feasible(&layout, &x0 - &r * (2.0 * alpha) + &v * (alpha * alpha));
                        let y = layout.with_powers(&s2.powers, &y);
                        match self.solve_surrogate(&y, opts) {
                            Ok(s3) if self.true_objective(&s3.powers) >= self.true_objective(&s2.powers) => {
                                trace.surrogate_solves += 1;
                                trace.inner_iterations.push(s3.iterations);
                                s3
                            }
                            _ => {
                                trace.surrogate_solves += 1;
                                s2
                            }
                        }
                    }
                };
            }
            let prev = trace.true_objectives[iteration - 1];
            let now = self.true_objective(&sol.powers);
            trace.surrogate_objectives.push(sol.objective);
            trace.true_objectives.push(now);
            trace.inner_kkt.push(sol.kkt);
            trace.iterations = iteration;
            if (now - prev).abs() < opts.outer_tol {
                trace.termination = Termination::Converged;
                break;
            }
        }
        if opts.reanchor != Reanchor::Plain {
            // Accelerated anchors can sit far from the final solution even
            // once the objective has settled; one plain step re-anchors there
            // so the surrogate slopes match the true ones.
            if let Ok(polished) = self.solve_surrogate(&sol.powers, opts) {
                trace.surrogate_solves += 1;
                trace.inner_iterations.push(polished.iterations);
                sol = polished;
            }
        }
        trace.true_kkt = self.true_kkt(&sol, opts);
        let mut result = sol.powers;
        if self.relay_path {
            result.t = self.tightest_t(&result);
        }
        trace.final_sum_rate = self.links.evaluate(&result).r_total;
        Ok((result, trace))
    }
}

#[derive(Debug)]
struct Layout {
    k: usize,
    vars: Vec<(PowerBlock, usize)>,
    /// Stacked `[p_sr, p_sd, p_rd]` index to optimization-variable index.
    pos: Vec<Option<usize>>,
    floors: Vec<f64>,
    n_t: usize,
}

impl Layout {
    /// Power variables only (no `t`).
    fn power_vec(&self, p: &PowerAllocation) -> DVector<f64> {
        DVector::from_iterator(self.vars.len(), self.vars.iter().map(|(b, k)| p.block(*b)[*k]))
    }

    /// `template` with its optimized powers replaced by `v`.
    fn with_powers(&self, template: &PowerAllocation, v: &DVector<f64>) -> PowerAllocation {
        let mut p = template.clone();
        for (j, (b, k)) in self.vars.iter().enumerate() {
            let x = v[j].max(self.floors[j]);
            match b {
                PowerBlock::Sr => p.p_sr[*k] = x,
                PowerBlock::Sd => p.p_sd[*k] = x,
                PowerBlock::Rd => p.p_rd[*k] = x,
            }
        }
        p
    }

    /// Sums of `x` and `d` over the relay block (`relay`) or the source block.
    fn block_sums(&self, x: &DVector<f64>, d: &DVector<f64>, relay: bool) -> (f64, f64) {
        let mut acc = (0.0, 0.0);
        for (j, (b, _)) in self.vars.iter().enumerate() {
            if (*b == PowerBlock::Rd) == relay {
                acc.0 += x[j];
                acc.1 += d[j];
            }
        }
        acc
    }

    fn dim(&self) -> usize {
        self.vars.len() + self.n_t
    }

    fn t_var(&self, j: usize) -> usize {
        self.vars.len() + j
    }

    fn powers(&self, x: &DVector<f64>) -> PowerAllocation {
        let mut p = PowerAllocation::zeros(self.k);
        for (j, (b, sc)) in self.vars.iter().enumerate() {
            match b {
                PowerBlock::Sr => p.p_sr[*sc] = x[j],
                PowerBlock::Sd => p.p_sd[*sc] = x[j],
                PowerBlock::Rd => p.p_rd[*sc] = x[j],
            }
        }
        p.t = (0..self.n_t).map(|j| x[self.t_var(j)]).collect();
        p
    }

    /// Restrict a stacked-layout vector to the optimization variables.
    fn project(&self, stacked: &[f64]) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        for (i, slot) in self.pos.iter().enumerate() {
            if let Some(j) = slot {
                v[*j] = stacked[i];
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy)]
enum Constraint {
    /// `t - Rbar_sr^k <= 0`
    HopSr(usize),
    /// `t - Rbar_rd^k <= 0`
    HopRd(usize),
    RelayBudget,
    SourceBudget,
    /// `floor_j - x_j <= 0`
    Floor(usize),
}

struct AnchorData {
    powers: PowerAllocation,
    i_sr: Vec<f64>,
    i_rd: Vec<f64>,
    i_sd: Vec<f64>,
}

struct SurrogateProgram<'p> {
    problem: &'p Problem<'p>,
    layout: &'p Layout,
    constraints: &'p [Constraint],
    anchor: &'p AnchorData,
}

struct Terms {
    sr: Vec<SurrogateTerm>,
    rd: Vec<SurrogateTerm>,
    sd: Vec<SurrogateTerm>,
}

impl SurrogateProgram<'_> {
    fn terms(&self, p: &PowerAllocation) -> Terms {
        let links = self.problem.links;
        let prelog = links.prelog;
        let k = self.layout.k;
        let build = |enabled: bool, link: &crate::rates::Link, i0: &[f64]| {
            if enabled {
                (0..k).map(|sc| link.surrogate_term(sc, p, i0[sc], prelog)).collect()
            } else {
                Vec::new()
            }
        };
        Terms {
            sr: build(self.problem.relay_path, &links.sr, &self.anchor.i_sr),
            rd: build(self.problem.relay_path, &links.rd, &self.anchor.i_rd),
            sd: build(self.problem.direct_path, &links.sd, &self.anchor.i_sd),
        }
    }

    /// Strictly feasible point near the anchor.
    fn start_point(&self, anchor: &PowerAllocation) -> DVector<f64> {
        const PULL: f64 = 1e-3;
        let layout = self.layout;
        let n_source = layout.vars.iter().filter(|(b, _)| *b != PowerBlock::Rd).count().max(1) as f64;
        let n_relay = layout.vars.iter().filter(|(b, _)| *b == PowerBlock::Rd).count().max(1) as f64;
        let mut x = DVector::zeros(layout.dim());
        for (j, (b, sc)) in layout.vars.iter().enumerate() {
            let centre = match b {
                PowerBlock::Rd => self.problem.power_relay / (2.0 * n_relay),
                _ => self.problem.power_source / (2.0 * n_source),
            };
            let a = anchor.block(*b)[*sc].max(layout.floors[j]);
            x[j] = (1.0 - PULL) * a + PULL * centre;
        }
        if layout.n_t > 0 {
            let p = layout.powers(&x);
            let terms = self.terms(&p);
            let mut t = vec![f64::INFINITY; layout.n_t];
            for sc in 0..layout.k {
                let j = self.problem.t_index(sc);
                t[j] = t[j].min(terms.sr[sc].value).min(terms.rd[sc].value);
            }
            for (j, v) in t.into_iter().enumerate() {
                x[layout.t_var(j)] = v - 1.0;
            }
        }
        x
    }
}

/// Assemble objective and constraints from per-subcarrier rate terms. Shared
/// by the surrogate program and the exact-problem KKT check.
fn assemble(
    problem: &Problem<'_>,
    layout: &Layout,
    constraints: &[Constraint],
    x: &DVector<f64>,
    sr: &[(f64, Vec<f64>)],
    rd: &[(f64, Vec<f64>)],
    sd: &[(f64, Vec<f64>)],
) -> FirstOrder {
    let n = layout.dim();
    let mut objective = 0.0;
    let mut grad = DVector::zeros(n);
    for (value, g) in sd {
        objective -= value;
        grad -= layout.project(g);
    }
    for j in 0..layout.n_t {
        objective -= x[layout.t_var(j)];
        grad[layout.t_var(j)] -= 1.0;
    }
    let m = constraints.len();
    let mut cons = DVector::zeros(m);
    let mut jac = DMatrix::zeros(m, n);
    for (i, c) in constraints.iter().enumerate() {
        match *c {
            Constraint::HopSr(k) | Constraint::HopRd(k) => {
                let (value, g) = if matches!(c, Constraint::HopSr(_)) { &sr[k] } else { &rd[k] };
                let tv = layout.t_var(problem.t_index(k));
                cons[i] = x[tv] - value;
                let row = -layout.project(g);
                jac.set_row(i, &row.transpose());
                jac[(i, tv)] += 1.0;
            }
            Constraint::RelayBudget => {
                let mut total = 0.0;
                for (j, (b, _)) in layout.vars.iter().enumerate() {
                    if *b == PowerBlock::Rd {
                        total += x[j];
                        jac[(i, j)] = 1.0;
                    }
                }
                cons[i] = total - problem.power_relay;
            }
            Constraint::SourceBudget => {
                let mut total = 0.0;
                for (j, (b, _)) in layout.vars.iter().enumerate() {
                    if *b != PowerBlock::Rd {
                        total += x[j];
                        jac[(i, j)] = 1.0;
                    }
                }
                cons[i] = total - problem.power_source;
            }
            Constraint::Floor(j) => {
                cons[i] = layout.floors[j] - x[j];
                jac[(i, j)] = -1.0;
            }
        }
    }
    FirstOrder { objective, grad, cons, jac }
}

impl ConvexProgram for SurrogateProgram<'_> {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    fn first_order(&self, x: &DVector<f64>) -> Option<FirstOrder> {
        if x.iter().take(self.layout.vars.len()).any(|v| *v < 0.0) {
            return None;
        }
        let p = self.layout.powers(x);
        let terms = self.terms(&p);
        let pick = |ts: &[SurrogateTerm]| ts.iter().map(|t| (t.value, t.grad.clone())).collect::<Vec<_>>();
        let eval = assemble(
            self.problem,
            self.layout,
            self.constraints,
            x,
            &pick(&terms.sr),
            &pick(&terms.rd),
            &pick(&terms.sd),
        );
        eval.objective.is_finite().then_some(eval)
    }

    fn lagrangian_hessian(&self, x: &DVector<f64>, lambda: &DVector<f64>) -> DMatrix<f64> {
        let n = self.layout.dim();
        let p = self.layout.powers(x);
        let terms = self.terms(&p);
        let mut h = DMatrix::zeros(n, n);
        // -Rbar has Hessian curvature * a a^T
        for t in &terms.sd {
            let a = self.layout.project(&t.signal_dir);
            h.ger(t.curvature, &a, &a, 1.0);
        }
        for (i, c) in self.constraints.iter().enumerate() {
            let t = match c {
                Constraint::HopSr(k) => &terms.sr[*k],
                Constraint::HopRd(k) => &terms.rd[*k],
                _ => continue,
            };
            let a = self.layout.project(&t.signal_dir);
            h.ger(lambda[i] * t.curvature, &a, &a, 1.0);
        }
        h
    }
}

fn exact_first_order(problem: &Problem<'_>, layout: &Layout, constraints: &[Constraint], x: &DVector<f64>) -> FirstOrder {
    let p = layout.powers(x);
    let links = problem.links;
    let prelog = links.prelog;
    let exact = |enabled: bool, link: &crate::rates::Link| -> Vec<(f64, Vec<f64>)> {
        if !enabled {
            return Vec::new();
        }
        (0..layout.k)
            .map(|k| (link.rate_at(k, &p, prelog), link.rate_gradient(k, &p, prelog)))
            .collect()
    };
    assemble(
        problem,
        layout,
        constraints,
        x,
        &exact(problem.relay_path, &links.sr),
        &exact(problem.relay_path, &links.rd),
        &exact(problem.direct_path, &links.sd),
    )
}

/// Solve the concave surrogate of the full rate-splitting problem around `anchor`.
pub fn solve_surrogate(
    coeffs: &RateCoefficients,
    anchor: &PowerAllocation,
    config: &SystemConfig,
    opts: &SolverOptions,
) -> Result<PowerAllocation> {
    let links = LinkSet::from_coefficients(coeffs, config.rate_prefactor);
    let problem = Problem::rate_splitting(&links, config).with_epigraph(opts.epigraph);
    problem.solve_surrogate(anchor, opts).map(|s| s.powers)
}

/// Rate-splitting power allocation by successive inner approximation.
pub fn sia_solve(
    coeffs: &RateCoefficients,
    config: &SystemConfig,
    opts: &SolverOptions,
) -> Result<(PowerAllocation, SolveTrace)> {
    let links = LinkSet::from_coefficients(coeffs, config.rate_prefactor);
    Problem::rate_splitting(&links, config).with_epigraph(opts.epigraph).sia(opts)
}
