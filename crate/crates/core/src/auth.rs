//! Authentication-log ingestion: converts event logs into per-user,
//! per-time-window directed weighted graphs.
//!
//! Input is a simplified 5-field CSV, one event per line:
//! `time,user,src_computer,dst_computer,red_team` with `red_team` 0 or 1.
//! Events are grouped into tumbling windows per user; edge weights count
//! authentication events per directed computer pair. A window that saw any
//! red-team event also carries a malicious graph counting all events.

use crate::error::AuthError;
use crate::graph::DirectedGraph;
use ndarray::Array2;
use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

/// One parsed authentication event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthEvent {
    pub time: u64,
    pub user: String,
    pub src_computer: String,
    pub dst_computer: String,
    pub red_team: bool,
}

/// Normal (and optionally malicious) activity graphs of one user in one
/// time window.
#[derive(Debug, Clone, PartialEq)]
pub struct UserWindowGraphs {
    pub user: String,
    pub window_start: u64,
    pub window_end: u64,
    /// Counts of non-red-team events per directed computer pair.
    pub normal: DirectedGraph,
    /// Present iff the window saw a red-team event; counts all events.
    pub malicious: Option<DirectedGraph>,
    /// Node index -> computer identifier, sorted lexicographically.
    pub node_labels: Vec<String>,
}

/// Parses the 5-field CSV; malformed lines fail with their line number.
pub fn parse_auth_log(reader: impl BufRead) -> Result<Vec<AuthEvent>, AuthError> {
    let mut events = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| AuthError::MalformedLine {
            line: line_no,
            reason: format!("read failed: {e}"),
        })?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(AuthError::MalformedLine {
                line: line_no,
                reason: format!("expected 5 comma-separated fields, got {}", fields.len()),
            });
        }
        let time: u64 = fields[0].parse().map_err(|_| AuthError::MalformedLine {
            line: line_no,
            reason: format!("bad time {:?}", fields[0]),
        })?;
        let red_team = match fields[4] {
            "0" => false,
            "1" => true,
            other => {
                return Err(AuthError::MalformedLine {
                    line: line_no,
                    reason: format!("red_team must be 0 or 1, got {other:?}"),
                })
            }
        };
        for (name, value) in
            [("user", fields[1]), ("src_computer", fields[2]), ("dst_computer", fields[3])]
        {
            if value.is_empty() {
                return Err(AuthError::MalformedLine {
                    line: line_no,
                    reason: format!("{name} is empty"),
                });
            }
        }
        events.push(AuthEvent {
            time,
            user: fields[1].to_string(),
            src_computer: fields[2].to_string(),
            dst_computer: fields[3].to_string(),
            red_team,
        });
    }
    Ok(events)
}

/// Groups events by (user, tumbling window) and builds the per-window
/// graphs. Output is sorted by user, then window start.
pub fn build_user_graphs(
    events: &[AuthEvent],
    window: u64,
) -> Result<Vec<UserWindowGraphs>, AuthError> {
    if window == 0 {
        return Err(AuthError::BadWindow);
    }
    let mut groups: BTreeMap<(&str, u64), Vec<&AuthEvent>> = BTreeMap::new();
    for ev in events {
        groups.entry((ev.user.as_str(), ev.time / window)).or_default().push(ev);
    }

    let mut out = Vec::with_capacity(groups.len());
    for ((user, window_idx), group) in groups {
        let computers: BTreeSet<&str> = group
            .iter()
            .flat_map(|e| [e.src_computer.as_str(), e.dst_computer.as_str()])
            .collect();
        let node_labels: Vec<String> = computers.iter().map(|c| c.to_string()).collect();
        let index: BTreeMap<&str, usize> =
            computers.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let n = node_labels.len();

        let mut normal = Array2::<f64>::zeros((n, n));
        let mut all = Array2::<f64>::zeros((n, n));
        let mut any_red = false;
        for ev in &group {
            let i = index[ev.src_computer.as_str()];
            let j = index[ev.dst_computer.as_str()];
            all[[i, j]] += 1.0;
            if ev.red_team {
                any_red = true;
            } else {
                normal[[i, j]] += 1.0;
            }
        }
        out.push(UserWindowGraphs {
            user: user.to_string(),
            window_start: window_idx * window,
            window_end: (window_idx + 1) * window,
            normal: DirectedGraph::from_weights(normal).expect("counts are nonnegative"),
            malicious: any_red
                .then(|| DirectedGraph::from_weights(all).expect("counts are nonnegative")),
            node_labels,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(text: &str) -> Result<Vec<AuthEvent>, AuthError> {
        parse_auth_log(Cursor::new(text))
    }

    #[test]
    fn empty_input_parses_to_nothing() {
        assert_eq!(parse("").unwrap(), vec![]);
    }

    #[test]
    fn single_line_parses_field_by_field() {
        let events = parse("10,U1,C1,C2,0").unwrap();
        assert_eq!(
            events,
            vec![AuthEvent {
                time: 10,
                user: "U1".into(),
                src_computer: "C1".into(),
                dst_computer: "C2".into(),
                red_team: false,
            }]
        );
    }

    #[test]
    fn malformed_lines_carry_their_number() {
        match parse("10,U1,C1").unwrap_err() {
            AuthError::MalformedLine { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error {other:?}"),
        }
        match parse("10,U1,C1,C2,0\nbogus,U1,C1,C2,0").unwrap_err() {
            AuthError::MalformedLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(parse("10,U1,C1,C2,2").is_err());
        assert!(parse("10,,C1,C2,0").is_err());
    }

    #[test]
    fn single_event_builds_one_window() {
        let events = parse("10,U1,C1,C2,0").unwrap();
        let graphs = build_user_graphs(&events, 3600).unwrap();
        assert_eq!(graphs.len(), 1);
        let g = &graphs[0];
        assert_eq!(g.user, "U1");
        assert_eq!(g.window_start, 0);
        assert_eq!(g.window_end, 3600);
        assert_eq!(g.node_labels, vec!["C1", "C2"]);
        assert_eq!(g.normal.weight(0, 1), 1.0);
        assert!(g.malicious.is_none());
    }

    #[test]
    fn repeated_events_accumulate_weight() {
        let events = parse("1,U1,C1,C2,0\n2,U1,C1,C2,0").unwrap();
        let graphs = build_user_graphs(&events, 100).unwrap();
        assert_eq!(graphs[0].normal.weight(0, 1), 2.0);
    }

    #[test]
    fn red_team_events_merge_into_malicious_only() {
        let events = parse("1,U1,C1,C2,0\n2,U1,C1,C3,1").unwrap();
        let graphs = build_user_graphs(&events, 100).unwrap();
        let g = &graphs[0];
        assert_eq!(g.node_labels, vec!["C1", "C2", "C3"]);
        assert_eq!(g.normal.weight(0, 1), 1.0);
        assert_eq!(g.normal.weight(0, 2), 0.0);
        let mal = g.malicious.as_ref().unwrap();
        assert_eq!(mal.weight(0, 1), 1.0);
        assert_eq!(mal.weight(0, 2), 1.0);
    }

    #[test]
    fn windows_are_tumbling_and_per_user() {
        let events = parse("5,U1,C1,C2,0\n105,U1,C1,C2,0\n6,U2,C9,C8,0").unwrap();
        let graphs = build_user_graphs(&events, 100).unwrap();
        assert_eq!(graphs.len(), 3);
        assert_eq!(graphs[0].user, "U1");
        assert_eq!(graphs[0].window_start, 0);
        assert_eq!(graphs[1].user, "U1");
        assert_eq!(graphs[1].window_start, 100);
        assert_eq!(graphs[2].user, "U2");
        assert!(build_user_graphs(&[], 0).is_err());
    }

    #[test]
    fn normal_is_entrywise_below_malicious_and_counts_conserve() {
        let text = "1,U1,C1,C2,0\n2,U1,C2,C1,1\n3,U1,C1,C2,0\n\
                    7,U2,C5,C6,0\n200,U1,C1,C3,1\n201,U1,C1,C3,1";
        let events = parse(text).unwrap();
        let graphs = build_user_graphs(&events, 100).unwrap();
        let mut represented = 0.0;
        for g in &graphs {
            if let Some(mal) = &g.malicious {
                for i in 0..g.normal.n() {
                    for j in 0..g.normal.n() {
                        assert!(g.normal.weight(i, j) <= mal.weight(i, j));
                    }
                }
                represented += mal.weights().sum();
            } else {
                represented += g.normal.weights().sum();
            }
        }
        assert_eq!(represented, events.len() as f64);
    }

    #[test]
    fn node_labels_are_a_bijection() {
        let events = parse("1,U1,C9,C1,0\n2,U1,C5,C9,0").unwrap();
        let graphs = build_user_graphs(&events, 100).unwrap();
        let labels = &graphs[0].node_labels;
        assert_eq!(labels.len(), 3);
        let set: BTreeSet<_> = labels.iter().collect();
        assert_eq!(set.len(), labels.len());
        assert!(labels.windows(2).all(|w| w[0] < w[1]));
    }
}
