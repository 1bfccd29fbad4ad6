//! Line-oriented text formats for networks and plans.
//!
//! Network files have three sections, each introduced by a header line:
//!
//! ```text
//! # comment
//! NODES
//! <id> <x> <y>
//! LINKS
//! <id> <from> <to> <length_m> <lanes> <vmax>
//! TURNS
//! <node> <in_link> <out_link> uncontrolled|yield|stop|signal <red_s> <green_s>
//! ```
//!
//! Plans files hold one vehicle per line:
//! `<vehicle_id> <departure_s> <entry_cell> <link_1> ... <link_n>`.

use std::fmt::Write as _;
use std::str::FromStr;

use super::{Control, NetError, Network, NetworkBuilder, Plan};

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Nodes,
    Links,
    Turns,
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = line.split_whitespace().collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

fn field<T: FromStr>(fields: &[&str], ix: usize, line: usize, what: &str) -> Result<T, NetError> {
    let raw = fields.get(ix).ok_or_else(|| NetError::Parse { line, msg: format!("missing {what}") })?;
    raw.parse().map_err(|_| NetError::Parse { line, msg: format!("invalid {what} '{raw}'") })
}

fn expect_fields(fields: &[&str], n: usize, line: usize, record: &str) -> Result<(), NetError> {
    if fields.len() != n {
        return Err(NetError::Parse {
            line,
            msg: format!("{record} record needs {n} fields, found {}", fields.len()),
        });
    }
    Ok(())
}

/// Parse a network file.
pub fn load_network(text: &str) -> Result<Network, NetError> {
    let mut section = Section::None;
    let mut b = NetworkBuilder::new();
    let mut node_lines = std::collections::HashMap::new();
    for (line, fields) in content_lines(text) {
        match fields[0] {
            "NODES" if fields.len() == 1 => {
                section = Section::Nodes;
                continue;
            }
            "LINKS" if fields.len() == 1 => {
                section = Section::Links;
                continue;
            }
            "TURNS" if fields.len() == 1 => {
                section = Section::Turns;
                continue;
            }
            _ => {}
        }
        match section {
            Section::None => {
                return Err(NetError::Parse { line, msg: "record before any section header".into() });
            }
            Section::Nodes => {
                expect_fields(&fields, 3, line, "node")?;
                let id: u64 = field(&fields, 0, line, "node id")?;
                let x: f64 = field(&fields, 1, line, "x coordinate")?;
                let y: f64 = field(&fields, 2, line, "y coordinate")?;
                if !(x.is_finite() && y.is_finite()) {
                    return Err(NetError::Invalid { line, msg: format!("node {id} has non-finite coordinates") });
                }
                if node_lines.insert(id, line).is_some() {
                    return Err(NetError::DuplicateId { line, kind: "node", id });
                }
                b.node(id, x, y);
            }
            Section::Links => {
                expect_fields(&fields, 6, line, "link")?;
                let id: u64 = field(&fields, 0, line, "link id")?;
                let from: u64 = field(&fields, 1, line, "from node")?;
                let to: u64 = field(&fields, 2, line, "to node")?;
                let length: f64 = field(&fields, 3, line, "length")?;
                let lanes: u8 = field(&fields, 4, line, "lane count")?;
                let v_max: u8 = field(&fields, 5, line, "vmax")?;
                b.link_at(line, id, from, to, length, lanes, v_max);
            }
            Section::Turns => {
                if fields.len() < 4 {
                    return Err(NetError::Parse { line, msg: "turn record needs at least 4 fields".into() });
                }
                let node: u64 = field(&fields, 0, line, "node id")?;
                let in_link: u64 = field(&fields, 1, line, "incoming link")?;
                let out_link: u64 = field(&fields, 2, line, "outgoing link")?;
                let control = match fields[3] {
                    "uncontrolled" | "none" => {
                        expect_fields(&fields, 4, line, "turn")?;
                        Control::Uncontrolled
                    }
                    "yield" => {
                        expect_fields(&fields, 4, line, "turn")?;
                        Control::Yield
                    }
                    "stop" => {
                        expect_fields(&fields, 4, line, "turn")?;
                        Control::Stop
                    }
                    "signal" => {
                        expect_fields(&fields, 6, line, "signal turn")?;
                        Control::Signal {
                            red_s: field(&fields, 4, line, "red duration")?,
                            green_s: field(&fields, 5, line, "green duration")?,
                        }
                    }
                    other => {
                        return Err(NetError::Parse { line, msg: format!("unknown control type '{other}'") });
                    }
                };
                b.turn_at(line, node, in_link, out_link, control);
            }
        }
    }
    b.build()
}

/// Write a network in the format read by [`load_network`].
pub fn serialize_network(net: &Network) -> String {
    let mut out = String::from("NODES\n");
    for n in net.nodes() {
        let _ = writeln!(out, "{} {} {}", n.id, n.x, n.y);
    }
    out.push_str("LINKS\n");
    for l in net.links() {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            l.id,
            net.node(l.from).id,
            net.node(l.to).id,
            l.length,
            l.lanes,
            l.v_max
        );
    }
    let turns: Vec<_> = net.explicit_turns().collect();
    if !turns.is_empty() {
        out.push_str("TURNS\n");
        for (i, o, c) in turns {
            let node = net.node(net.link(i).to).id;
            let (a, b) = (net.link(i).id, net.link(o).id);
            let _ = match c {
                Control::Uncontrolled => writeln!(out, "{node} {a} {b} uncontrolled"),
                Control::Yield => writeln!(out, "{node} {a} {b} yield"),
                Control::Stop => writeln!(out, "{node} {a} {b} stop"),
                Control::Signal { red_s, green_s } => writeln!(out, "{node} {a} {b} signal {red_s} {green_s}"),
            };
        }
    }
    out
}

/// Parse a plans file against `net`, resolving link ids to indices.
/// The result is sorted by departure time, then vehicle id.
pub fn load_plans(text: &str, net: &Network) -> Result<Vec<Plan>, NetError> {
    let mut plans = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (line, fields) in content_lines(text) {
        if fields.len() < 4 {
            return Err(NetError::Parse { line, msg: "plan record needs an id, departure, entry cell and a route".into() });
        }
        let vehicle_id: u64 = field(&fields, 0, line, "vehicle id")?;
        let departure: u32 = field(&fields, 1, line, "departure time")?;
        let entry_cell: u32 = field(&fields, 2, line, "entry cell")?;
        let mut route = Vec::with_capacity(fields.len() - 3);
        for ix in 3..fields.len() {
            let id: u64 = field(&fields, ix, line, "link id")?;
            let l = net
                .link_by_id(id)
                .ok_or_else(|| NetError::BadPlan { line, vehicle: vehicle_id, msg: format!("unknown link {id}") })?;
            route.push(l);
        }
        if !seen.insert(vehicle_id) {
            return Err(NetError::DuplicateId { line, kind: "vehicle", id: vehicle_id });
        }
        let plan = Plan { vehicle_id, departure, entry_cell, route };
        net.check_plan(&plan).map_err(|msg| NetError::BadPlan { line, vehicle: vehicle_id, msg })?;
        plans.push(plan);
    }
    plans.sort_by_key(|p| (p.departure, p.vehicle_id));
    Ok(plans)
}

pub fn serialize_plans(plans: &[Plan], net: &Network) -> String {
    let mut out = String::new();
    for p in plans {
        let _ = write!(out, "{} {} {}", p.vehicle_id, p.departure, p.entry_cell);
        for &l in &p.route {
            let _ = write!(out, " {}", net.link(l).id);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SAMPLE: &str = "\
# two links
NODES
1 0 0
2 75 0
3 150 0
LINKS
10 1 2 75.0 1 5
11 2 3 7.5 2 3
TURNS
2 10 11 signal 30 30
";

    #[test]
    fn parses_sample() {
        let net = load_network(SAMPLE).unwrap();
        assert_eq!(net.node_count(), 3);
        assert_eq!(net.link(0).cells, 10);
        assert_eq!(net.link(1).cells, 1);
        assert_eq!(net.link(1).lanes, 2);
        assert_eq!(net.turn(0, 1), Some(Control::Signal { red_s: 30, green_s: 30 }));
    }

    #[test]
    fn dangling_node_reports_line() {
        let text = "NODES\n1 0 0\n2 1 0\nLINKS\n10 1 7 75 1 5\n";
        assert_eq!(load_network(text), Err(NetError::DanglingNode { line: 5, link: 10, node: 7 }));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "NODES\n1 0 0\n2 zero 0\n";
        match load_network(text) {
            Err(NetError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = "NODES\n1 0 0\n2 1 0\nLINKS\n10 1 2 -5 1 5\n";
        assert!(matches!(load_network(text), Err(NetError::NonPositiveLength { line: 5, .. })));
        assert!(matches!(load_network("1 0 0\n"), Err(NetError::Parse { line: 1, .. })));
    }

    #[test]
    fn plans_parse_and_validate() {
        let net = load_network(SAMPLE).unwrap();
        let plans = load_plans("7 12 3 10 11\n5 0 0 10\n", &net).unwrap();
        assert_eq!(plans[0].vehicle_id, 5);
        assert_eq!(plans[1].route, vec![0, 1]);
        assert!(matches!(load_plans("1 0 0 11 10\n", &net), Err(NetError::BadPlan { line: 1, .. })));
        assert!(matches!(load_plans("1 0 0 99\n", &net), Err(NetError::BadPlan { .. })));
        let text = serialize_plans(&plans, &net);
        assert_eq!(load_plans(&text, &net).unwrap(), plans);
    }

    proptest! {
        #[test]
        fn network_round_trip(
            coords in proptest::collection::vec((-1e4f64..1e4, -1e4f64..1e4), 2..8),
            lens in proptest::collection::vec((1.0f64..500.0, 1u8..4, 1u8..=5), 1..12),
        ) {
            let mut text = String::from("NODES\n");
            for (i, (x, y)) in coords.iter().enumerate() {
                text.push_str(&format!("{} {} {}\n", i + 1, x, y));
            }
            text.push_str("LINKS\n");
            let n = coords.len();
            for (k, (len, lanes, v)) in lens.iter().enumerate() {
                let from = k % n;
                let to = (k + 1) % n;
                text.push_str(&format!("{} {} {} {} {} {}\n", 100 + k, from + 1, to + 1, len, lanes, v));
            }
            let net = load_network(&text).unwrap();
            let again = load_network(&serialize_network(&net)).unwrap();
            prop_assert_eq!(&again, &net);
            for l in net.links() {
                prop_assert!((l.cells as f64 * 7.5 - l.length).abs() < 7.5);
            }
        }
    }
}
