use mekler::classify::DEFAULT_ENUM_CAP;
use mekler::encode::{decode, encode, RelStructure};
use mekler::graph::check_nice;
use mekler::interpret::roundtrip;
use mekler::shatter::{evaluate, parse_formula, Assignment, Structure, Value};
use mekler::{Graph, MeklerGroup};

#[test]
fn encoded_structure_survives_the_group_round_trip() {
    let s = RelStructure::new(2);
    let e = encode(&s).unwrap();
    assert_eq!(e.graph.n(), 10);
    assert!(check_nice(&e.graph).is_nice);
    assert_eq!(decode(&e).unwrap(), s);
    let r = roundtrip(&e.graph, 3, DEFAULT_ENUM_CAP).unwrap();
    assert!(r.isomorphic);
    assert_eq!(r.edges, e.graph.edge_count());
    let mut map = r.isomorphism.unwrap();
    map.sort();
    assert_eq!(map, (0..10).collect::<Vec<_>>());
}

#[test]
fn group_formulas_agree_with_adjacency() {
    let c = Graph::petersen();
    let g = MeklerGroup::new(c.clone(), 3).unwrap();
    let f = parse_formula("Comm(x_1, y0_1)").unwrap();
    let s = Structure::Group(g.clone());
    for u in 0..10 {
        for v in 0..10 {
            let asg = Assignment {
                x: vec![Value::Group(g.generator(u))],
                y: vec![vec![Value::Group(g.generator(v))]],
            };
            assert_eq!(evaluate(&f, &s, &asg).unwrap(), u == v || c.adjacent(u, v));
        }
    }
}
