//! Property tests for complex construction: determinism, closure, the
//! exactness identity, and the multimodal triangle rule on randomly
//! generated event streams.

mod common;

use gvf_core::complex::{
    betti_numbers, build_complex, EventStream, NodeKind, ThresholdConfig,
};
use proptest::prelude::*;

fn arbitrary_stream() -> impl Strategy<Value = EventStream> {
    // Up to 7 agents, 3 sensors; random subsets of pairs/links active.
    (
        2usize..7,
        0usize..4,
        proptest::collection::vec(any::<bool>(), 21),
        proptest::collection::vec(any::<bool>(), 21),
        proptest::collection::vec(0.0f64..1.0, 21),
    )
        .prop_map(|(n_agents, n_sensors, pair_on, dwell_on, jitter)| {
            let mut ev = EventStream::default();
            let mut idx = 0;
            for i in 0..n_agents {
                for j in (i + 1)..n_agents {
                    let on = pair_on[idx % pair_on.len()];
                    let rssi = if on { 55.0 + 10.0 * jitter[idx % jitter.len()] } else { 10.0 };
                    ev.proximity.push(gvf_core::complex::ProxRecord {
                        t: (idx % 5) as f64,
                        agent_i: format!("a{i}"),
                        agent_j: format!("a{j}"),
                        rssi,
                    });
                    idx += 1;
                }
            }
            ev.proximity.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
            let mut idx = 0;
            for s in 0..n_sensors {
                for i in 0..n_agents {
                    if dwell_on[idx % dwell_on.len()] {
                        ev.dwell.push(gvf_core::complex::DwellRecord {
                            t: 10.0,
                            agent: format!("a{i}"),
                            sensor: format!("e{s}"),
                            duration: 8.0,
                        });
                    }
                    idx += 1;
                }
            }
            ev
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn construction_invariants(ev in arbitrary_stream()) {
        let cfg = ThresholdConfig::default();
        let k1 = build_complex(&ev, 0.0, &cfg).unwrap();
        let k2 = build_complex(&ev, 0.0, &cfg).unwrap();

        // Determinism: bitwise-identical serialisation.
        prop_assert_eq!(
            serde_json::to_string(&k1).unwrap(),
            serde_json::to_string(&k2).unwrap()
        );

        // Exactness: B1 B2 = 0 in integer arithmetic.
        prop_assert!(k1.b1().multiply(k1.b2()).is_empty());

        // Closure and canonical ordering of simplices.
        for &(a, b) in k1.edges() {
            prop_assert!(a < b && b < k1.vertex_count());
        }
        for &(a, b, c) in k1.triangles() {
            prop_assert!(a < b && b < c);
            prop_assert!(k1.edge_index(a, b).is_some());
            prop_assert!(k1.edge_index(a, c).is_some());
            prop_assert!(k1.edge_index(b, c).is_some());
            let kinds: std::collections::BTreeSet<NodeKind> =
                [a, b, c].iter().map(|&v| k1.vertices()[v].kind).collect();
            prop_assert!(kinds.len() >= 2);
        }

        // Betti sanity: beta0 >= 1 on nonempty complexes, beta1 >= 0 by type.
        let summary = betti_numbers(&k1).unwrap();
        if !k1.is_empty() {
            prop_assert!(summary.beta0 >= 1);
        }

        // Euler check chains the rank formula to an independent count:
        // V - E + T = beta0 - beta1 + beta2, and beta2 >= 0.
        let euler = k1.vertex_count() as i64 - k1.edge_count() as i64
            + k1.triangle_count() as i64;
        let beta2 = euler - summary.beta0 as i64 + summary.beta1 as i64;
        prop_assert!(beta2 >= 0, "euler {} beta0 {} beta1 {}", euler, summary.beta0, summary.beta1);
    }

    #[test]
    fn serialisation_round_trip(ev in arbitrary_stream()) {
        let k = build_complex(&ev, 0.0, &ThresholdConfig::default()).unwrap();
        let json = serde_json::to_string(&k).unwrap();
        let back: gvf_core::complex::SimplicialComplex = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(k, back);
    }

    #[test]
    fn stream_jsonl_round_trip(ev in arbitrary_stream()) {
        let text = ev.to_jsonl_string().unwrap();
        let back = EventStream::from_jsonl(text.as_bytes()).unwrap();
        prop_assert_eq!(ev, back);
    }
}
