use optcast_core::content::{PacketInvariants, TieBreak};
use optcast_core::{
    build_overlay, gen_random_dag, run_packet_sim, schedule_contents, topological_index, NodeId, PacketSimConfig,
    PacketWorld, RateAllocation,
};

fn diamond() -> optcast_core::OverlayGraph {
    build_overlay(
        4,
        &[(NodeId(0), NodeId(1)), (NodeId(0), NodeId(2)), (NodeId(1), NodeId(3)), (NodeId(2), NodeId(3))],
        NodeId(0),
    )
    .unwrap()
}

#[test]
fn diamond_pipeline_delivers_full_rate() {
    let g = diamond();
    let r = RateAllocation::new(vec![2.0, 2.0, 1.0, 1.0]).unwrap();
    let report = run_packet_sim(&g, &r, 2.0, &PacketSimConfig::new(2000)).unwrap();
    assert!(!report.invalid_rate);
    assert!((report.min_cut - 2.0).abs() < 1e-9);
    assert!(report.worst_ratio(&g) >= 0.98, "{}", report.worst_ratio(&g));
    assert_eq!(report.invariants.total(), 0);
}

#[test]
fn starved_receiver_is_bounded_by_its_cut() {
    let g = diamond();
    let r = RateAllocation::new(vec![2.0, 2.0, 0.5, 0.5]).unwrap();
    let report = run_packet_sim(&g, &r, 2.0, &PacketSimConfig::new(2000)).unwrap();
    assert!(report.invalid_rate);
    let sink = report.rates.iter().find(|n| n.node == NodeId(3)).unwrap();
    assert!(sink.measured_rate <= 1.0 + 1e-2);
}

#[test]
fn transfers_are_local_and_causal() {
    for seed in 0..20 {
        let g = gen_random_dag(7, 0.5, seed).unwrap();
        let r = RateAllocation::new(vec![1.5; g.edge_count()]).unwrap();
        let order = topological_index(&g);
        let mut world = PacketWorld::new(&g, &r, 1.0, 1.0);
        let mut ties = TieBreak::random(seed);
        let mut tally = PacketInvariants::default();
        for _ in 0..200 {
            world.generate(1.0);
            world.accrue(&r, 1.0, 1.0);
            let plan = schedule_contents(&world, &g, &order, &mut ties);
            for t in &plan.transfers {
                let edge = g.edge(t.edge);
                assert!(world.buffer(edge.from).contains(t.packet));
                assert!(!world.buffer(edge.to).contains(t.packet));
            }
            world.apply(&g, &plan, &mut tally);
        }
        assert_eq!(tally.total(), 0);
    }
}

#[test]
fn random_ties_are_reproducible() {
    let g = gen_random_dag(8, 0.5, 3).unwrap();
    let r = RateAllocation::new(vec![1.0; g.edge_count()]).unwrap();
    let config = PacketSimConfig { random_ties: Some(9), ..PacketSimConfig::new(500) };
    let a = run_packet_sim(&g, &r, 1.0, &config).unwrap();
    let b = run_packet_sim(&g, &r, 1.0, &config).unwrap();
    assert_eq!(a, b);
}
