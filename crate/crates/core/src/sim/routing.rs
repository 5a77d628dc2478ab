//! Next-hop selection.

use super::topology::{dist, Pos};
use crate::NodeId;

/// How a node picks the next hop for a packet.
#[derive(Debug, Clone, PartialEq)]
pub enum NextHopRule {
    /// Static next hop (line and tree topologies); `None` for the sink.
    Fixed(Option<NodeId>),
    /// Greedy geographic forwarding toward the sink with a straightness
    /// tie-break, over the node's learned neighbor table.
    Geographic { sink: NodeId, sink_pos: Pos },
}

/// Perpendicular distance from `p` to the line through `a` and `b`; falls
/// back to `dist(p, b)` when the line degenerates to a point.
fn line_distance(p: Pos, a: Pos, b: Pos) -> f64 {
    let len = dist(a, b);
    if len < 1e-9 {
        return dist(p, b);
    }
    let cross = (b.0 - a.0) * (a.1 - p.1) - (a.0 - p.0) * (b.1 - a.1);
    cross.abs() / len
}

/// Greedy geographic next hop: among neighbors strictly closer to the sink
/// than we are, pick the one whose position deviates least from the
/// straight line from the packet's origin to the sink; ties fall to the
/// neighbor closer to the sink, then to the lower id. Returns `None` in a
/// routing void.
pub fn geographic_next_hop<I>(
    self_pos: Pos,
    origin_pos: Pos,
    sink: NodeId,
    sink_pos: Pos,
    neighbors: I,
) -> Option<NodeId>
where
    I: IntoIterator<Item = (NodeId, Pos)>,
{
    let d_self = dist(self_pos, sink_pos);
    let mut best: Option<(f64, f64, NodeId)> = None;
    for (id, pos) in neighbors {
        if id == sink {
            return Some(sink);
        }
        let d = dist(pos, sink_pos);
        if d >= d_self - 1e-9 {
            continue;
        }
        let key = (line_distance(pos, origin_pos, sink_pos), d, id);
        match best {
            Some(b) if (b.0, b.1, b.2) <= key => {}
            _ => best = Some(key),
        }
    }
    best.map(|(_, _, id)| id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sink_in_range_wins_immediately() {
        let hop = geographic_next_hop(
            (100.0, 0.0),
            (100.0, 0.0),
            0,
            (0.0, 0.0),
            vec![(5, (50.0, 10.0)), (0, (0.0, 0.0))],
        );
        assert_eq!(hop, Some(0));
    }

    #[test]
    fn prefers_the_straightest_closer_neighbor() {
        // Origin at (200, 0), sink at origin: the line is the x-axis.
        // Neighbor 7 sits on the axis, neighbor 8 is equally close to the
        // sink but off-axis.
        let hop = geographic_next_hop(
            (200.0, 0.0),
            (200.0, 0.0),
            0,
            (0.0, 0.0),
            vec![(8, (87.0, 50.0)), (7, (100.0, 0.0))],
        );
        assert_eq!(hop, Some(7));
    }

    #[test]
    fn ignores_neighbors_not_closer_to_sink() {
        let hop = geographic_next_hop(
            (100.0, 0.0),
            (100.0, 0.0),
            0,
            (0.0, 0.0),
            vec![(3, (150.0, 0.0)), (4, (100.0, 20.0))],
        );
        assert_eq!(hop, None);
    }

    #[test]
    fn tie_breaks_by_distance_then_id() {
        // Both neighbors sit on the origin-sink axis; 9 is closer to the
        // sink.
        let hop = geographic_next_hop(
            (300.0, 0.0),
            (300.0, 0.0),
            0,
            (0.0, 0.0),
            vec![(2, (200.0, 0.0)), (9, (100.0, 0.0))],
        );
        assert_eq!(hop, Some(9));
        // Identical positions: lower id wins.
        let hop = geographic_next_hop(
            (300.0, 0.0),
            (300.0, 0.0),
            0,
            (0.0, 0.0),
            vec![(6, (200.0, 0.0)), (4, (200.0, 0.0))],
        );
        assert_eq!(hop, Some(4));
    }
}
