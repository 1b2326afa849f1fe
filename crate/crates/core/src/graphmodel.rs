//! Random environments: uniform tail-to-head matchings over a fixed bi-degree
//! sequence, realized as directed multigraphs.
//!
//! Sampling runs the sequential rule: tails are processed in vertex order,
//! each one matched to a head drawn uniformly from the heads still free
//! (a partial Fisher-Yates over head slots, so the completed matching is a
//! uniform bijection). A collision trace flags the steps whose chosen head
//! lands on a vertex that is already alive, i.e. touched by an earlier arc or
//! owning the tail currently being matched.

use crate::degrees::{build_degree_sequence, DegreeSequence};
use crate::numeric::fnv1a64;
use crate::rng::rng_from_seed;
use rand::Rng;
use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::OnceLock;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("k = {k} outside 1..=m (m = {m})")]
    KOutOfRange { k: u64, m: u64 },
    #[error("matching has only {formed} of {m} arcs; not a full environment")]
    Incomplete { formed: u64, m: u64 },
    #[error("maximum degree {delta_max} < 2; tree depth is undefined")]
    DegenerateDelta { delta_max: u32 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(String),
}

/// A sampled environment: the degree sequence plus, for every vertex, the
/// multiset of head-owner vertices its tails map to, in tail order.
#[derive(Clone, Debug)]
pub struct Environment {
    seq: DegreeSequence,
    seed: u64,
    /// Prefix sums of out-degrees; tails of vertex `v` occupy
    /// `out_start[v]..out_start[v+1]` in `targets`.
    out_start: Vec<usize>,
    /// Head-owner vertex of each tail, global tail order.
    targets: Vec<u32>,
    fingerprint: u64,
    reverse: OnceLock<(Vec<usize>, Vec<u32>)>,
}

impl PartialEq for Environment {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq && self.seed == other.seed && self.targets == other.targets
    }
}
impl Eq for Environment {}

impl Environment {
    fn from_parts(seq: DegreeSequence, seed: u64, targets: Vec<u32>) -> Self {
        debug_assert_eq!(targets.len() as u64, seq.m());
        let out_start = out_prefix(&seq);
        let mut bytes = Vec::with_capacity(24 + targets.len() * 4);
        bytes.extend_from_slice(&(seq.n() as u64).to_le_bytes());
        bytes.extend_from_slice(&seq.m().to_le_bytes());
        bytes.extend_from_slice(&seed.to_le_bytes());
        for &t in &targets {
            bytes.extend_from_slice(&t.to_le_bytes());
        }
        let fingerprint = fnv1a64(&bytes);
        Environment { seq, seed, out_start, targets, fingerprint, reverse: OnceLock::new() }
    }

    pub fn seq(&self) -> &DegreeSequence {
        &self.seq
    }

    pub fn n(&self) -> usize {
        self.seq.n()
    }

    pub fn m(&self) -> u64 {
        self.seq.m()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stable identity used for context checks between distributions and the
    /// environment they were computed on.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Head-owner vertices reached by the tails of `v`, tail order.
    pub fn out_arcs(&self, v: u32) -> &[u32] {
        &self.targets[self.out_start[v as usize]..self.out_start[v as usize + 1]]
    }

    pub fn out_degree(&self, v: u32) -> u32 {
        self.seq.d_plus(v as usize)
    }

    /// All arc targets in global tail order.
    pub fn targets(&self) -> &[u32] {
        &self.targets
    }

    fn reverse_csr(&self) -> &(Vec<usize>, Vec<u32>) {
        self.reverse.get_or_init(|| {
            let n = self.n();
            let mut start = vec![0usize; n + 1];
            for &t in &self.targets {
                start[t as usize + 1] += 1;
            }
            for v in 0..n {
                start[v + 1] += start[v];
            }
            let mut fill = start.clone();
            let mut src = vec![0u32; self.targets.len()];
            for v in 0..n as u32 {
                for &t in self.out_arcs(v) {
                    src[fill[t as usize]] = v;
                    fill[t as usize] += 1;
                }
            }
            (start, src)
        })
    }

    /// Source vertices of the arcs into `v` (multiset).
    pub fn in_arcs(&self, v: u32) -> &[u32] {
        let (start, src) = self.reverse_csr();
        &src[start[v as usize]..start[v as usize + 1]]
    }
}

fn out_prefix(seq: &DegreeSequence) -> Vec<usize> {
    let mut out_start = Vec::with_capacity(seq.n() + 1);
    out_start.push(0usize);
    let mut acc = 0usize;
    for &(_, dp) in seq.entries() {
        acc += dp as usize;
        out_start.push(acc);
    }
    out_start
}

fn in_prefix(seq: &DegreeSequence) -> Vec<u64> {
    let mut pre = Vec::with_capacity(seq.n() + 1);
    pre.push(0u64);
    let mut acc = 0u64;
    for &(dm, _) in seq.entries() {
        acc += dm as u64;
        pre.push(acc);
    }
    pre
}

/// Step flags of a sequential matching run; `flags[j]` is true when the head
/// chosen at step `j` landed on an already-alive vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CollisionTrace {
    pub flags: Vec<bool>,
}

impl CollisionTrace {
    pub fn k(&self) -> u64 {
        self.flags.len() as u64
    }

    pub fn collisions(&self) -> u64 {
        self.flags.iter().filter(|&&f| f).count() as u64
    }
}

/// First `k` arcs of a sequential matching run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialEnvironment {
    seq: DegreeSequence,
    seed: u64,
    targets: Vec<u32>,
}

impl PartialEnvironment {
    pub fn seq(&self) -> &DegreeSequence {
        &self.seq
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn arcs_formed(&self) -> u64 {
        self.targets.len() as u64
    }

    /// Head-owner per tail for the formed prefix, tail order.
    pub fn targets(&self) -> &[u32] {
        &self.targets
    }

    pub fn into_environment(self) -> Result<Environment, GraphError> {
        if self.arcs_formed() != self.seq.m() {
            return Err(GraphError::Incomplete { formed: self.arcs_formed(), m: self.seq.m() });
        }
        Ok(Environment::from_parts(self.seq, self.seed, self.targets))
    }
}

/// Uniform environment over the sequence.
pub fn sample_environment(seq: &DegreeSequence, seed: u64) -> Environment {
    let (targets, _) = run_matcher(seq, seed, seq.m(), false);
    Environment::from_parts(seq.clone(), seed, targets)
}

/// Runs the sequential matcher for exactly `k` arcs and records the per-step
/// collision flags. `k == m` yields a completable environment.
pub fn sample_with_collision_trace(
    seq: &DegreeSequence,
    seed: u64,
    k: u64,
) -> Result<(PartialEnvironment, CollisionTrace), GraphError> {
    if k == 0 || k > seq.m() {
        return Err(GraphError::KOutOfRange { k, m: seq.m() });
    }
    let (targets, flags) = run_matcher(seq, seed, k, true);
    Ok((
        PartialEnvironment { seq: seq.clone(), seed, targets },
        CollisionTrace { flags: flags.expect("flags requested") },
    ))
}

/// Sequential matcher. Head slots are a virtual array of size m laid out in
/// vertex order; step `j` swaps a uniform pick from `[j, m)` into place.
/// The dense path materializes the owner array; the sparse path keeps only
/// displaced entries so short traces cost O(k). Both consume the RNG
/// identically, so a partial run is a bit-exact prefix of the full run.
fn run_matcher(
    seq: &DegreeSequence,
    seed: u64,
    k: u64,
    want_flags: bool,
) -> (Vec<u32>, Option<Vec<bool>>) {
    let m = seq.m() as usize;
    let k = k as usize;
    let mut rng = rng_from_seed(seed);
    let out_start = out_prefix(seq);
    let mut targets = Vec::with_capacity(k);
    let mut flags = want_flags.then(|| Vec::with_capacity(k));
    let mut alive = want_flags.then(|| vec![false; seq.n()]);
    let mut tail_vertex = 0usize;

    let dense = k * 8 >= m;
    let mut owners_dense = Vec::new();
    if dense {
        owners_dense.reserve_exact(m);
        for (v, &(dm, _)) in seq.entries().iter().enumerate() {
            owners_dense.extend(std::iter::repeat(v as u32).take(dm as usize));
        }
    }
    let in_pre = if dense { Vec::new() } else { in_prefix(seq) };
    let mut displaced: HashMap<usize, u32> = HashMap::new();
    let owner_of_slot = |slot: usize, displaced: &HashMap<usize, u32>| -> u32 {
        if let Some(&v) = displaced.get(&slot) {
            return v;
        }
        // vertex whose head range contains the slot
        (in_pre.partition_point(|&p| p <= slot as u64) - 1) as u32
    };

    for j in 0..k {
        while out_start[tail_vertex + 1] <= j {
            tail_vertex += 1;
        }
        if let Some(alive) = alive.as_mut() {
            alive[tail_vertex] = true;
        }
        let pick = rng.random_range(j..m);
        let chosen = if dense {
            owners_dense.swap(j, pick);
            owners_dense[j]
        } else {
            let chosen = owner_of_slot(pick, &displaced);
            let at_j = owner_of_slot(j, &displaced);
            displaced.insert(pick, at_j);
            chosen
        };
        if let (Some(flags), Some(alive)) = (flags.as_mut(), alive.as_mut()) {
            flags.push(alive[chosen as usize]);
            alive[chosen as usize] = true;
        }
        targets.push(chosen);
    }
    (targets, flags)
}

/// True when the environment is a single strongly connected component.
pub fn strongly_connected(env: &Environment) -> bool {
    scc_count(env) == 1
}

/// Tarjan over the multigraph, iterative so deep graphs cannot overflow the
/// call stack.
fn scc_count(env: &Environment) -> usize {
    const UNSET: u32 = u32::MAX;
    let n = env.n();
    let mut index = vec![UNSET; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut next_index = 0u32;
    let mut components = 0usize;
    let mut call: Vec<(u32, usize)> = Vec::new();

    for root in 0..n as u32 {
        if index[root as usize] != UNSET {
            continue;
        }
        call.push((root, 0));
        index[root as usize] = next_index;
        low[root as usize] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root as usize] = true;

        while let Some(&mut (v, ref mut ai)) = call.last_mut() {
            let arcs = env.out_arcs(v);
            if *ai < arcs.len() {
                let w = arcs[*ai];
                *ai += 1;
                if index[w as usize] == UNSET {
                    call.push((w, 0));
                    index[w as usize] = next_index;
                    low[w as usize] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w as usize] = true;
                } else if on_stack[w as usize] {
                    low[v as usize] = low[v as usize].min(index[w as usize]);
                }
            } else {
                call.pop();
                if low[v as usize] == index[v as usize] {
                    components += 1;
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w as usize] = false;
                        if w == v {
                            break;
                        }
                    }
                }
                if let Some(&mut (p, _)) = call.last_mut() {
                    low[p as usize] = low[p as usize].min(low[v as usize]);
                }
            }
        }
    }
    components
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// BFS ball summary. The ball contains every vertex within `radius` and every
/// arc leaving a vertex at depth < radius (arcs reversed for `Backward`),
/// multiplicities included. It is connected by construction, so
/// `extra_arcs = arc_count - (vertex_count - 1)` and the ball is a tree
/// exactly when no extra arc exists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BallReport {
    pub center: u32,
    pub radius: usize,
    pub direction: Direction,
    pub vertex_count: usize,
    pub arc_count: u64,
    pub is_tree: bool,
    pub extra_arcs: u64,
}

pub fn ball(env: &Environment, center: u32, radius: usize, direction: Direction) -> BallReport {
    let mut seen: HashMap<u32, usize> = HashMap::new();
    seen.insert(center, 0);
    let mut frontier = vec![center];
    let mut arc_count = 0u64;
    for depth in 0..radius {
        let mut next = Vec::new();
        for &v in &frontier {
            let arcs = match direction {
                Direction::Forward => env.out_arcs(v),
                Direction::Backward => env.in_arcs(v),
            };
            for &u in arcs {
                arc_count += 1;
                if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(u) {
                    e.insert(depth + 1);
                    next.push(u);
                }
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    let vertex_count = seen.len();
    let extra_arcs = arc_count - (vertex_count as u64 - 1);
    BallReport {
        center,
        radius,
        direction,
        vertex_count,
        arc_count,
        is_tree: extra_arcs == 0,
        extra_arcs,
    }
}

/// Exploration depth `h = floor(ln n / (10 ln delta_max))` used by the
/// equilibrium proxy and the tree-like start set.
pub fn tree_depth(n: usize, delta_max: u32) -> Result<usize, GraphError> {
    if delta_max < 2 {
        return Err(GraphError::DegenerateDelta { delta_max });
    }
    Ok(((n as f64).ln() / (10.0 * (delta_max as f64).ln())).floor() as usize)
}

/// Vertices whose forward ball of radius `h` is a tree, ascending order.
pub fn v_star(env: &Environment) -> Result<Vec<u32>, GraphError> {
    let h = tree_depth(env.n(), env.seq().delta_max())?;
    Ok((0..env.n() as u32)
        .filter(|&i| ball(env, i, h, Direction::Forward).is_tree)
        .collect())
}

/// Text format: `n m seed` header, then one `i: j1 j2 ...` line per vertex in
/// tail order. Round-trips the environment bit-exactly.
pub fn write_graph<W: Write>(env: &Environment, mut writer: W) -> Result<(), GraphError> {
    writeln!(writer, "{} {} {}", env.n(), env.m(), env.seed())?;
    for v in 0..env.n() as u32 {
        write!(writer, "{v}:")?;
        for &t in env.out_arcs(v) {
            write!(writer, " {t}")?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

pub fn read_graph<R: BufRead>(reader: R) -> Result<Environment, GraphError> {
    let mut lines = reader.lines();
    // Leading '#' lines are annotations (run provenance), not data.
    let header = loop {
        let line = lines
            .next()
            .ok_or_else(|| GraphError::Parse("missing header".into()))??;
        if !line.trim_start().starts_with('#') {
            break line;
        }
    };
    let mut it = header.split_whitespace();
    let n: usize = parse(it.next(), "n")?;
    let m: u64 = parse(it.next(), "m")?;
    let seed: u64 = parse(it.next(), "seed")?;
    if it.next().is_some() {
        return Err(GraphError::Parse("header has trailing fields".into()));
    }

    let mut targets: Vec<u32> = Vec::new();
    let mut d_plus = vec![0u32; n];
    let mut d_minus = vec![0u32; n];
    for v in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| GraphError::Parse(format!("expected {n} vertex lines, got {v}")))??;
        let (label, rest) = line
            .split_once(':')
            .ok_or_else(|| GraphError::Parse(format!("vertex line {v} missing ':'")))?;
        let got: usize = label
            .trim()
            .parse()
            .map_err(|_| GraphError::Parse(format!("bad vertex label {label:?}")))?;
        if got != v {
            return Err(GraphError::Parse(format!("expected vertex {v}, found {got}")));
        }
        for tok in rest.split_whitespace() {
            let t: u32 = tok
                .parse()
                .map_err(|_| GraphError::Parse(format!("bad target {tok:?} on line {v}")))?;
            if t as usize >= n {
                return Err(GraphError::Parse(format!("target {t} out of range on line {v}")));
            }
            targets.push(t);
            d_minus[t as usize] += 1;
            d_plus[v] += 1;
        }
    }
    if targets.len() as u64 != m {
        return Err(GraphError::Parse(format!(
            "header claims {m} arcs but lines hold {}",
            targets.len()
        )));
    }
    if let Some(extra) = lines.next() {
        let extra = extra?;
        if !extra.trim().is_empty() {
            return Err(GraphError::Parse("trailing content after vertex lines".into()));
        }
    }
    let entries: Vec<(u32, u32)> = d_minus.into_iter().zip(d_plus).collect();
    let seq = build_degree_sequence(entries)
        .map_err(|e| GraphError::Parse(format!("inconsistent degrees: {e}")))?;
    Ok(Environment::from_parts(seq, seed, targets))
}

pub fn load_graph_file(path: &std::path::Path) -> Result<Environment, GraphError> {
    let file = std::fs::File::open(path)?;
    read_graph(std::io::BufReader::new(file))
}

pub fn save_graph_file(env: &Environment, path: &std::path::Path) -> Result<(), GraphError> {
    let mut buf = Vec::new();
    write_graph(env, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

fn parse<T: std::str::FromStr>(field: Option<&str>, name: &str) -> Result<T, GraphError> {
    field
        .ok_or_else(|| GraphError::Parse(format!("missing field {name}")))?
        .parse()
        .map_err(|_| GraphError::Parse(format!("invalid field {name}")))
}
