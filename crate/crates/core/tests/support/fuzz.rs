//! Random host graphs built by sequences of primitive edits.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rootbst_core::{Atom, EdgeId, HostGraph, Label, Mark, NodeId};

const NODE_MARKS: [Option<Mark>; 5] = [None, Some(Mark::Red), Some(Mark::Green), Some(Mark::Blue), Some(Mark::Grey)];
const EDGE_MARKS: [Option<Mark>; 5] = [None, Some(Mark::Dashed), Some(Mark::Red), Some(Mark::Green), Some(Mark::Blue)];

pub fn random_label(rng: &mut ChaCha8Rng) -> Label {
    let atoms: Vec<Atom> = (0..rng.gen_range(0..3))
        .map(|_| {
            if rng.gen_bool(0.6) {
                Atom::Int(rng.gen_range(-50..50))
            } else {
                let s: String = (0..rng.gen_range(0..4)).map(|_| rng.gen_range(' '..='~')).collect();
                Atom::str(&s)
            }
        })
        .collect();
    Label::new(atoms)
}

fn live_nodes(g: &HostGraph) -> Vec<NodeId> {
    g.nodes().map(|(id, _)| id).collect()
}

fn live_edges(g: &HostGraph) -> Vec<EdgeId> {
    g.edges().map(|(id, _)| id).collect()
}

/// One random mutation; returns false if none applied.
pub fn mutate(g: &mut HostGraph, rng: &mut ChaCha8Rng) -> bool {
    let nodes = live_nodes(g);
    let edges = live_edges(g);
    let pick_node = |rng: &mut ChaCha8Rng| nodes[rng.gen_range(0..nodes.len())];
    let pick_edge = |rng: &mut ChaCha8Rng| edges[rng.gen_range(0..edges.len())];
    match rng.gen_range(0..9) {
        0 | 1 => {
            let label = random_label(rng);
            g.add_node(label, NODE_MARKS[rng.gen_range(0..5)], rng.gen_bool(0.3)).unwrap();
        }
        2 if !nodes.is_empty() => {
            let n = pick_node(rng);
            let rec = g.node(n).unwrap();
            if rec.out_edges().is_empty() && rec.in_edges().is_empty() {
                g.delete_node(n).unwrap();
            } else {
                let e = rec.out_edges().first().or(rec.in_edges().first()).copied().unwrap();
                g.delete_edge(e).unwrap();
            }
        }
        3 | 4 if !nodes.is_empty() => {
            let (s, t) = (pick_node(rng), pick_node(rng));
            let label = random_label(rng);
            g.add_edge(s, t, label, EDGE_MARKS[rng.gen_range(0..5)]).unwrap();
        }
        5 if !edges.is_empty() => g.delete_edge(pick_edge(rng)).unwrap(),
        6 if !nodes.is_empty() => {
            let n = pick_node(rng);
            match rng.gen_range(0..3) {
                0 => g.set_label(n, random_label(rng)).unwrap(),
                1 => g.set_mark(n, NODE_MARKS[rng.gen_range(0..5)]).unwrap(),
                _ => g.set_root(n, rng.gen_bool(0.5)).unwrap(),
            }
        }
        7 if !edges.is_empty() => {
            let e = pick_edge(rng);
            if rng.gen_bool(0.5) {
                g.set_edge_label(e, random_label(rng)).unwrap();
            } else {
                g.set_edge_mark(e, EDGE_MARKS[rng.gen_range(0..5)]).unwrap();
            }
        }
        8 if !nodes.is_empty() => {
            // re-rooting an already rooted node moves it to the front
            let n = pick_node(rng);
            g.set_root(n, false).unwrap();
            g.set_root(n, true).unwrap();
        }
        _ => return false,
    }
    true
}

pub fn random_graph(rng: &mut ChaCha8Rng) -> HostGraph {
    let mut g = HostGraph::new();
    for _ in 0..rng.gen_range(0..40) {
        mutate(&mut g, rng);
    }
    g
}
