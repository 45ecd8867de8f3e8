//! Packet-level content scheduling over fixed link rates.
//!
//! The source emits numbered packets; every slot, each receiver pulls
//! packets it is missing from its in-neighbors, spending per-edge token
//! credit. Transfers read the buffers as they stood at the start of the slot
//! (store and forward).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::capacity::RateAllocation;
use crate::error::{Error, Result};
use crate::graph::{topological_index, EdgeId, IndexAssignment, NodeId, OverlayGraph};
use crate::oracle::min_cut;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Packet(pub usize);

/// Sequence numbers held by one node.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PacketBuffer {
    held: Vec<bool>,
    count: usize,
    // Every packet below this is held.
    low: usize,
}

impl PacketBuffer {
    pub fn contains(&self, p: Packet) -> bool {
        self.held.get(p.0).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Smallest sequence number not held.
    pub fn first_missing(&self) -> usize {
        self.low
    }

    /// One past the largest held sequence number.
    pub fn horizon(&self) -> usize {
        self.held.len()
    }

    fn insert(&mut self, p: Packet) -> bool {
        if p.0 >= self.held.len() {
            self.held.resize(p.0 + 1, false);
        }
        if self.held[p.0] {
            return false;
        }
        self.held[p.0] = true;
        self.count += 1;
        while self.low < self.held.len() && self.held[self.low] {
            self.low += 1;
        }
        true
    }

    pub fn iter(&self) -> impl Iterator<Item = Packet> + '_ {
        self.held.iter().enumerate().filter(|(_, &h)| h).map(|(i, _)| Packet(i))
    }
}

/// Fractional transfer credit in packets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TokenBucket {
    pub credit: f64,
    pub burst_cap: f64,
}

impl TokenBucket {
    fn for_fill(fill: f64) -> Self {
        TokenBucket { credit: 0.0, burst_cap: fill.ceil().max(1.0) + 1.0 }
    }

    fn accrue(&mut self, fill: f64) {
        self.credit = (self.credit + fill).min(self.burst_cap);
    }

    pub fn tokens(&self) -> usize {
        self.credit.floor() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transfer {
    pub edge: EdgeId,
    pub packet: Packet,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TransferPlan {
    pub transfers: Vec<Transfer>,
}

#[derive(Clone, Debug)]
pub struct PacketWorld {
    buffers: Vec<PacketBuffer>,
    buckets: Vec<TokenBucket>,
    source_bucket: TokenBucket,
    generated: usize,
    source: NodeId,
}

/// Per-run counts of broken packet invariants. All zero on a healthy run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PacketInvariants {
    pub slots_checked: usize,
    /// A node held a packet the source had not generated.
    pub causality: usize,
    /// A node received a packet no in-neighbor held at the start of the slot.
    pub locality: usize,
    /// An edge moved more packets than its whole token count.
    pub token_overrun: usize,
    /// A receiver was sent a packet it already held or was already getting.
    pub duplicate: usize,
}

impl PacketInvariants {
    pub fn total(&self) -> usize {
        self.causality + self.locality + self.token_overrun + self.duplicate
    }
}

impl PacketWorld {
    /// Empty buffers; per-edge fill `r_e * dt / packet_size` packets per slot.
    pub fn new(g: &OverlayGraph, r: &RateAllocation, dt: f64, packet_size: f64) -> Self {
        PacketWorld {
            buffers: vec![PacketBuffer::default(); g.node_count()],
            buckets: r.as_slice().iter().map(|&x| TokenBucket::for_fill(x * dt / packet_size)).collect(),
            source_bucket: TokenBucket { credit: 0.0, burst_cap: f64::INFINITY },
            generated: 0,
            source: g.source(),
        }
    }

    pub fn buffer(&self, v: NodeId) -> &PacketBuffer {
        &self.buffers[v.0]
    }

    pub fn bucket(&self, e: EdgeId) -> TokenBucket {
        self.buckets[e.0]
    }

    pub fn generated(&self) -> usize {
        self.generated
    }

    /// Source token bucket: emits `floor(credit)` fresh packets.
    pub fn generate(&mut self, fill: f64) {
        self.source_bucket.accrue(fill);
        let n = self.source_bucket.tokens();
        self.source_bucket.credit -= n as f64;
        for _ in 0..n {
            self.buffers[self.source.0].insert(Packet(self.generated));
            self.generated += 1;
        }
    }

    pub fn accrue(&mut self, r: &RateAllocation, dt: f64, packet_size: f64) {
        for (b, &x) in self.buckets.iter_mut().zip(r.as_slice()) {
            b.accrue(x * dt / packet_size);
        }
    }

    /// Applies a plan and spends its tokens, tallying invariant breaches
    /// against the pre-transfer state.
    pub fn apply(&mut self, g: &OverlayGraph, plan: &TransferPlan, tally: &mut PacketInvariants) {
        tally.slots_checked += 1;
        let mut used = vec![0usize; self.buckets.len()];
        let mut incoming: Vec<(NodeId, Packet)> = Vec::with_capacity(plan.transfers.len());
        for t in &plan.transfers {
            let edge = g.edge(t.edge);
            used[t.edge.0] += 1;
            if !self.buffers[edge.from.0].contains(t.packet) {
                tally.locality += 1;
            }
            if t.packet.0 >= self.generated {
                tally.causality += 1;
            }
            incoming.push((edge.to, t.packet));
        }
        for (e, &n) in used.iter().enumerate() {
            if n > self.buckets[e].tokens() {
                tally.token_overrun += 1;
            }
            self.buckets[e].credit = (self.buckets[e].credit - n as f64).max(0.0);
        }
        for (v, p) in incoming {
            if !self.buffers[v.0].insert(p) {
                tally.duplicate += 1;
            }
        }
    }
}

/// Tie-breaking among equally rare packets.
#[derive(Clone, Debug)]
pub enum TieBreak {
    LowestSequence,
    Random(Box<ChaCha8Rng>),
}

impl TieBreak {
    pub fn random(seed: u64) -> Self {
        TieBreak::Random(Box::new(ChaCha8Rng::seed_from_u64(seed)))
    }
}

/// One slot of greedy content scheduling. Receivers are visited in
/// topological order; each serves its in-neighbors round-robin by ascending
/// id, and every turn takes the packet held by the fewest in-neighbors
/// among those the neighbor holds and the receiver still misses.
pub fn schedule_contents(
    world: &PacketWorld,
    g: &OverlayGraph,
    order: &IndexAssignment,
    ties: &mut TieBreak,
) -> TransferPlan {
    let mut plan = TransferPlan::default();
    for &v in order.order() {
        let in_edges = g.in_edges(v);
        if in_edges.is_empty() {
            continue;
        }
        let mine = &world.buffers[v.0];
        let holders: Vec<&PacketBuffer> = in_edges.iter().map(|&e| &world.buffers[g.edge(e).from.0]).collect();
        let top = holders.iter().map(|b| b.horizon()).max().unwrap_or(0);
        // (packet, rarity) for every packet v misses that some in-neighbor holds.
        let mut candidates: Vec<(usize, usize)> = (mine.first_missing()..top)
            .filter(|&p| !mine.contains(Packet(p)))
            .filter_map(|p| {
                let rarity = holders.iter().filter(|b| b.contains(Packet(p))).count();
                (rarity > 0).then_some((p, rarity))
            })
            .collect();
        if let TieBreak::Random(rng) = ties {
            candidates.shuffle(rng);
        }
        let mut taken = vec![false; candidates.len()];
        let mut tokens: Vec<usize> = in_edges.iter().map(|&e| world.buckets[e.0].tokens()).collect();
        loop {
            let mut progressed = false;
            for (k, &e) in in_edges.iter().enumerate() {
                if tokens[k] == 0 {
                    continue;
                }
                let holder = holders[k];
                let pick = candidates
                    .iter()
                    .enumerate()
                    .filter(|&(i, &(p, _))| !taken[i] && holder.contains(Packet(p)))
                    .min_by_key(|&(i, &(p, rarity))| match ties {
                        TieBreak::LowestSequence => (rarity, p),
                        TieBreak::Random(_) => (rarity, i),
                    });
                match pick {
                    Some((i, &(p, _))) => {
                        taken[i] = true;
                        tokens[k] -= 1;
                        plan.transfers.push(Transfer { edge: e, packet: Packet(p) });
                        progressed = true;
                    }
                    None => tokens[k] = 0,
                }
            }
            if !progressed {
                break;
            }
        }
    }
    plan
}

#[derive(Clone, Debug, PartialEq)]
pub struct PacketSimConfig {
    pub packet_size: f64,
    pub dt: f64,
    pub slots: usize,
    /// `None` keeps the deterministic lowest-sequence tie-break.
    pub random_ties: Option<u64>,
}

impl PacketSimConfig {
    pub fn new(slots: usize) -> Self {
        PacketSimConfig { packet_size: 1.0, dt: 1.0, slots, random_ties: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeRate {
    pub node: NodeId,
    pub packets_received: usize,
    pub measured_rate: f64,
    pub target_rate: f64,
}

impl NodeRate {
    pub fn ratio(&self) -> f64 {
        self.measured_rate / self.target_rate
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PacketReport {
    pub rates: Vec<NodeRate>,
    /// The source rate exceeds some receiver's min-cut under the link rates.
    pub invalid_rate: bool,
    pub min_cut: f64,
    pub invariants: PacketInvariants,
}

impl PacketReport {
    /// Smallest measured-to-target ratio over the receivers.
    pub fn worst_ratio(&self, g: &OverlayGraph) -> f64 {
        self.rates.iter().filter(|r| r.node != g.source()).map(NodeRate::ratio).fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,packets_received,measured_rate,target_rate,ratio\n");
        for r in &self.rates {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.node,
                r.packets_received,
                r.measured_rate,
                r.target_rate,
                r.ratio()
            ));
        }
        out
    }
}

/// Runs the packet simulation for `config.slots` slots. Each node's rate is
/// measured over the second half of the horizon.
pub fn run_packet_sim(
    g: &OverlayGraph,
    r: &RateAllocation,
    source_rate: f64,
    config: &PacketSimConfig,
) -> Result<PacketReport> {
    if r.len() != g.edge_count() {
        return Err(Error::DimensionMismatch { expected: g.edge_count(), actual: r.len() });
    }
    if !(source_rate > 0.0 && config.packet_size > 0.0 && config.dt > 0.0 && config.slots >= 2) {
        return Err(Error::InvalidParams("packet simulation needs positive rate, size, dt and >= 2 slots".into()));
    }
    let mut cut = f64::INFINITY;
    for v in g.receivers() {
        cut = cut.min(min_cut(g, r, v)?.value);
    }
    let order = topological_index(g);
    let mut ties = match config.random_ties {
        Some(seed) => TieBreak::random(seed),
        None => TieBreak::LowestSequence,
    };
    let mut world = PacketWorld::new(g, r, config.dt, config.packet_size);
    let mut tally = PacketInvariants::default();
    let source_fill = source_rate * config.dt / config.packet_size;
    let half = config.slots / 2;
    let mut at_half = vec![0; g.node_count()];
    for slot in 0..config.slots {
        if slot == half {
            at_half = world.buffers.iter().map(PacketBuffer::len).collect();
        }
        world.generate(source_fill);
        world.accrue(r, config.dt, config.packet_size);
        let plan = schedule_contents(&world, g, &order, &mut ties);
        world.apply(g, &plan, &mut tally);
    }
    let window = (config.slots - half) as f64 * config.dt;
    let rates = g
        .nodes()
        .map(|v| {
            let held = world.buffers[v.0].len();
            NodeRate {
                node: v,
                packets_received: held,
                measured_rate: (held - at_half[v.0]) as f64 * config.packet_size / window,
                target_rate: source_rate,
            }
        })
        .collect();
    Ok(PacketReport { rates, invalid_rate: source_rate > cut * (1.0 + 1e-9), min_cut: cut, invariants: tally })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_overlay;

    fn chain() -> OverlayGraph {
        build_overlay(3, &[(NodeId(0), NodeId(1)), (NodeId(1), NodeId(2))], NodeId(0)).unwrap()
    }

    fn world_with(g: &OverlayGraph, held: &[(usize, &[usize])], credit: &[f64]) -> PacketWorld {
        let r = RateAllocation::zeros(g.edge_count());
        let mut w = PacketWorld::new(g, &r, 1.0, 1.0);
        for &(v, packets) in held {
            for &p in packets {
                w.buffers[v].insert(Packet(p));
                w.generated = w.generated.max(p + 1);
            }
        }
        for (b, &c) in w.buckets.iter_mut().zip(credit) {
            *b = TokenBucket { credit: c, burst_cap: 10.0 };
        }
        w
    }

    #[test]
    fn token_budget_binds() {
        let g = build_overlay(2, &[(NodeId(0), NodeId(1))], NodeId(0)).unwrap();
        let w = world_with(&g, &[(0, &[0, 1, 2, 3, 4]), (1, &[0, 1, 2])], &[1.0]);
        let order = topological_index(&g);
        let plan = schedule_contents(&w, &g, &order, &mut TieBreak::LowestSequence);
        assert_eq!(plan.transfers, vec![Transfer { edge: EdgeId(0), packet: Packet(3) }]);
    }

    #[test]
    fn duplicate_suppressed_across_neighbors() {
        // s -> a, s -> b, a -> v, b -> v; a and b both hold only packet 7.
        let g = build_overlay(
            4,
            &[(NodeId(0), NodeId(1)), (NodeId(0), NodeId(2)), (NodeId(1), NodeId(3)), (NodeId(2), NodeId(3))],
            NodeId(0),
        )
        .unwrap();
        let w = world_with(&g, &[(0, &[7]), (1, &[7]), (2, &[7])], &[0.0, 0.0, 1.0, 1.0]);
        let plan = schedule_contents(&w, &g, &topological_index(&g), &mut TieBreak::LowestSequence);
        assert_eq!(plan.transfers, vec![Transfer { edge: EdgeId(2), packet: Packet(7) }]);
    }

    #[test]
    fn rarest_packet_first() {
        // v's in-neighbors: a holds {1, 2}, b holds {1}. a should send 2, b sends 1.
        let g = build_overlay(
            4,
            &[(NodeId(0), NodeId(1)), (NodeId(0), NodeId(2)), (NodeId(1), NodeId(3)), (NodeId(2), NodeId(3))],
            NodeId(0),
        )
        .unwrap();
        let w = world_with(&g, &[(0, &[1, 2]), (1, &[1, 2]), (2, &[1])], &[0.0, 0.0, 1.0, 1.0]);
        let plan = schedule_contents(&w, &g, &topological_index(&g), &mut TieBreak::LowestSequence);
        assert_eq!(
            plan.transfers,
            vec![Transfer { edge: EdgeId(2), packet: Packet(2) }, Transfer { edge: EdgeId(3), packet: Packet(1) }]
        );
    }

    #[test]
    fn lossless_chain() {
        let g = chain();
        let r = RateAllocation::new(vec![2.0, 2.0]).unwrap();
        let report = run_packet_sim(&g, &r, 2.0, &PacketSimConfig::new(2000)).unwrap();
        assert!(!report.invalid_rate);
        for rate in &report.rates {
            assert!((rate.measured_rate - 2.0).abs() <= 0.1, "{rate:?}");
        }
        assert_eq!(report.invariants.total(), 0);
    }

    #[test]
    fn fractional_rates() {
        let g = chain();
        let r = RateAllocation::new(vec![0.75, 0.75]).unwrap();
        let report = run_packet_sim(&g, &r, 0.7, &PacketSimConfig::new(4000)).unwrap();
        assert!(report.worst_ratio(&g) > 0.99, "{:?}", report.rates);
    }

    #[test]
    fn overload_is_flagged() {
        let g = chain();
        let r = RateAllocation::new(vec![2.0, 2.0]).unwrap();
        let report = run_packet_sim(&g, &r, 3.0, &PacketSimConfig::new(2000)).unwrap();
        assert!(report.invalid_rate);
        assert!(report.rates[2].measured_rate < 3.0 * 0.9);
        assert_eq!(report.min_cut, 2.0);
    }

    #[test]
    fn random_ties_are_reproducible() {
        let g = build_overlay(
            4,
            &[(NodeId(0), NodeId(1)), (NodeId(0), NodeId(2)), (NodeId(1), NodeId(3)), (NodeId(2), NodeId(3))],
            NodeId(0),
        )
        .unwrap();
        let r = RateAllocation::new(vec![1.0; 4]).unwrap();
        let config = PacketSimConfig { random_ties: Some(3), ..PacketSimConfig::new(1000) };
        let a = run_packet_sim(&g, &r, 1.0, &config).unwrap();
        let b = run_packet_sim(&g, &r, 1.0, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.invariants.total(), 0);
    }

    #[test]
    fn csv_header() {
        let g = chain();
        let r = RateAllocation::new(vec![1.0, 1.0]).unwrap();
        let report = run_packet_sim(&g, &r, 1.0, &PacketSimConfig::new(10)).unwrap();
        assert!(report.to_csv().starts_with("node,packets_received,measured_rate,target_rate,ratio\n0,"));
    }
}
