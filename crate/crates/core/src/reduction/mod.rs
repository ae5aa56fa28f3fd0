//! Geographic clustering of buses and contraction of a case onto cluster
//! representatives.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{BusId, CaseError, GridCase, Line};

/// Mean Earth radius, km.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, thiserror::Error)]
pub enum ReductionError {
    #[error("k = {k} is out of range for {n} points")]
    KOutOfRange { k: usize, n: usize },
    #[error("bus {0} is not part of the case")]
    UnknownBus(BusId),
    #[error("bus {0} has no cluster assignment")]
    Unassigned(BusId),
    #[error("reduced network is disconnected; isolated representatives: {isolated:?}")]
    Disconnected { isolated: Vec<BusId> },
    #[error(transparent)]
    Case(#[from] CaseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub latitude: f64,
    pub longitude: f64,
}

impl GeoPoint {
    pub fn new(latitude: f64, longitude: f64) -> Self {
        Self { latitude, longitude }
    }
}

/// Great-circle distance in the units of `earth_radius`.
pub fn haversine(a: GeoPoint, b: GeoPoint, earth_radius: f64) -> f64 {
    let (p1, p2) = (a.latitude.to_radians(), b.latitude.to_radians());
    let dp = p2 - p1;
    let dl = (b.longitude - a.longitude).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    let c = 2.0 * h.sqrt().atan2((1.0 - h).max(0.0).sqrt());
    earth_radius * c
}

/// Initial bearing from `a` to `b`, degrees clockwise from north in [0, 360).
pub fn bearing(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.latitude.to_radians(), b.latitude.to_radians());
    let dl = (b.longitude - a.longitude).to_radians();
    let y = dl.sin() * p2.cos();
    let x = p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos();
    y.atan2(x).to_degrees().rem_euclid(360.0)
}

pub fn case_points(case: &GridCase) -> Vec<(BusId, GeoPoint)> {
    case.buses
        .iter()
        .map(|b| (b.id, GeoPoint::new(b.latitude, b.longitude)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    /// Sorted ascending.
    pub medoids: Vec<BusId>,
    pub assignment: BTreeMap<BusId, BusId>,
    /// km
    pub total_distance: f64,
    /// Objective after each improvement step of the winning restart.
    pub trace: Vec<f64>,
}

impl Clustering {
    pub fn members(&self, medoid: BusId) -> Vec<BusId> {
        self.assignment
            .iter()
            .filter(|(_, &m)| m == medoid)
            .map(|(&b, _)| b)
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KMedoidsOptions {
    pub restarts: usize,
    pub earth_radius: f64,
    /// Follow the alternating iteration with medoid/non-medoid swaps until no
    /// swap lowers the objective.
    pub swap_refine: bool,
    pub max_iterations: usize,
}

impl Default for KMedoidsOptions {
    fn default() -> Self {
        Self {
            restarts: 16,
            earth_radius: EARTH_RADIUS_KM,
            swap_refine: true,
            max_iterations: 10_000,
        }
    }
}

pub fn kmedoids(points: &[(BusId, GeoPoint)], k: usize, seed: u64) -> Result<Clustering, ReductionError> {
    kmedoids_with(points, k, seed, &KMedoidsOptions::default())
}

pub fn kmedoids_with(
    points: &[(BusId, GeoPoint)],
    k: usize,
    seed: u64,
    opts: &KMedoidsOptions,
) -> Result<Clustering, ReductionError> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(ReductionError::KOutOfRange { k, n });
    }
    // order by id so that index order is id order for tie-breaking
    let mut pts = points.to_vec();
    pts.sort_by_key(|p| p.0);
    let dist: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| haversine(pts[i].1, pts[j].1, opts.earth_radius)).collect())
        .collect();

    let runs: Vec<Run> = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut medoids: Vec<usize> = sample(&mut rng, n, k).into_vec();
            medoids.sort_unstable();
            run_from(&dist, medoids, opts)
        })
        .collect();
    let best = runs
        .into_iter()
        .min_by(|a, b| a.cost.total_cmp(&b.cost).then_with(|| a.medoids.cmp(&b.medoids)))
        .expect("at least one restart");

    let medoids: Vec<BusId> = best.medoids.iter().map(|&i| pts[i].0).collect();
    let assign = nearest(&dist, &best.medoids);
    let assignment = (0..n).map(|i| (pts[i].0, pts[best.medoids[assign[i]]].0)).collect();
    Ok(Clustering {
        k,
        medoids,
        assignment,
        total_distance: best.cost,
        trace: best.trace,
    })
}

struct Run {
    medoids: Vec<usize>,
    cost: f64,
    trace: Vec<f64>,
}

/// Position in `medoids` of each point's nearest medoid; ties go to the lower
/// index, which is the lower id.
fn nearest(dist: &[Vec<f64>], medoids: &[usize]) -> Vec<usize> {
    (0..dist.len())
        .map(|i| {
            let mut best = 0;
            for (m, &c) in medoids.iter().enumerate() {
                if dist[i][c] < dist[i][medoids[best]] {
                    best = m;
                }
            }
            best
        })
        .collect()
}

fn cost_of(dist: &[Vec<f64>], medoids: &[usize]) -> f64 {
    nearest(dist, medoids)
        .iter()
        .enumerate()
        .map(|(i, &m)| dist[i][medoids[m]])
        .sum()
}

fn run_from(dist: &[Vec<f64>], mut medoids: Vec<usize>, opts: &KMedoidsOptions) -> Run {
    let mut cost = cost_of(dist, &medoids);
    let mut trace = vec![cost];
    let mut iterations = 0;
    loop {
        // alternate assignment and medoid update until the medoid set is stable
        while iterations < opts.max_iterations {
            iterations += 1;
            let assign = nearest(dist, &medoids);
            let mut next = medoids.clone();
            for (m, slot) in next.iter_mut().enumerate() {
                let members: Vec<usize> = (0..dist.len()).filter(|&i| assign[i] == m).collect();
                let mut best = (f64::INFINITY, usize::MAX);
                for &c in &members {
                    let s: f64 = members.iter().map(|&i| dist[c][i]).sum();
                    if s < best.0 {
                        best = (s, c);
                    }
                }
                *slot = best.1;
            }
            next.sort_unstable();
            let next_cost = cost_of(dist, &next);
            debug_assert!(next_cost <= cost * (1.0 + 1e-12) + 1e-12, "objective rose: {cost} -> {next_cost}");
            if next == medoids || next_cost >= cost {
                break;
            }
            medoids = next;
            cost = next_cost;
            trace.push(cost);
        }
        if !opts.swap_refine || iterations >= opts.max_iterations {
            break;
        }
        match best_swap(dist, &medoids, cost) {
            Some((next, next_cost)) => {
                debug_assert!(next_cost < cost);
                medoids = next;
                cost = next_cost;
                trace.push(cost);
                iterations += 1;
            }
            None => break,
        }
    }
    Run { medoids, cost, trace }
}

/// Best improving single medoid/non-medoid exchange.
fn best_swap(dist: &[Vec<f64>], medoids: &[usize], cost: f64) -> Option<(Vec<usize>, f64)> {
    let n = dist.len();
    let is_medoid: BTreeSet<usize> = medoids.iter().copied().collect();
    // nearest and second-nearest medoid distance per point
    let mut near = vec![(usize::MAX, f64::INFINITY); n];
    let mut second = vec![f64::INFINITY; n];
    for i in 0..n {
        for (m, &c) in medoids.iter().enumerate() {
            let d = dist[i][c];
            if d < near[i].1 {
                second[i] = near[i].1;
                near[i] = (m, d);
            } else if d < second[i] {
                second[i] = d;
            }
        }
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for (m, _) in medoids.iter().enumerate() {
        for o in (0..n).filter(|o| !is_medoid.contains(o)) {
            let mut delta = 0.0;
            for i in 0..n {
                let keep = if near[i].0 == m { second[i] } else { near[i].1 };
                delta += keep.min(dist[i][o]) - near[i].1;
            }
            if delta < -1e-9 * (1.0 + cost) && best.is_none_or(|b| delta < b.0) {
                best = Some((delta, m, o));
            }
        }
    }
    let (_, m, o) = best?;
    let mut next = medoids.to_vec();
    next[m] = o;
    next.sort_unstable();
    let next_cost = cost_of(dist, &next);
    (next_cost < cost).then_some((next, next_cost))
}

/// A reduced case and the original-bus to representative map.
#[derive(Debug, Clone)]
pub struct Aggregation {
    pub case: GridCase,
    pub bus_map: BTreeMap<BusId, BusId>,
}

impl Aggregation {
    /// Sums per-bus quantities (such as loads) onto representatives.
    pub fn rehome(&self, values: &BTreeMap<BusId, f64>) -> Result<BTreeMap<BusId, f64>, ReductionError> {
        let mut out = BTreeMap::new();
        for (&bus, &v) in values {
            let rep = *self.bus_map.get(&bus).ok_or(ReductionError::UnknownBus(bus))?;
            *out.entry(rep).or_insert(0.0) += v;
        }
        Ok(out)
    }
}

/// Contracts `case` onto cluster medoids plus the `keep` buses.
///
/// Lines inside a cluster vanish; lines joining the same representative pair
/// merge in parallel (admittances and ratings add) and take the id of their
/// lowest-id member and the conductor, length and voltage of their
/// lowest-reactance member.
pub fn aggregate(case: &GridCase, clustering: &Clustering, keep: &[BusId]) -> Result<Aggregation, ReductionError> {
    let ids: BTreeSet<BusId> = case.buses.iter().map(|b| b.id).collect();
    for &k in keep {
        if !ids.contains(&k) {
            return Err(ReductionError::UnknownBus(k));
        }
    }
    let keep: BTreeSet<BusId> = keep.iter().copied().collect();
    let mut bus_map = BTreeMap::new();
    for &b in &ids {
        let rep = if keep.contains(&b) {
            b
        } else {
            *clustering.assignment.get(&b).ok_or(ReductionError::Unassigned(b))?
        };
        if !ids.contains(&rep) {
            return Err(ReductionError::UnknownBus(rep));
        }
        bus_map.insert(b, rep);
    }
    let reps: BTreeSet<BusId> = bus_map.values().copied().collect();
    let buses = case.buses.iter().filter(|b| reps.contains(&b.id)).cloned().collect();

    let mut groups: BTreeMap<(BusId, BusId), Vec<&Line>> = BTreeMap::new();
    for l in &case.lines {
        let (a, b) = (bus_map[&l.from_bus], bus_map[&l.to_bus]);
        if a != b {
            groups.entry((a.min(b), a.max(b))).or_default().push(l);
        }
    }
    let mut lines = Vec::with_capacity(groups.len());
    for ((_, _), group) in groups {
        let lead = group
            .iter()
            .min_by(|x, y| x.reactance.total_cmp(&y.reactance).then(x.id.cmp(&y.id)))
            .expect("non-empty group");
        let admittance: f64 = group.iter().map(|l| 1.0 / l.reactance).sum();
        lines.push(Line {
            id: group.iter().map(|l| l.id).min().expect("non-empty group"),
            from_bus: bus_map[&lead.from_bus],
            to_bus: bus_map[&lead.to_bus],
            reactance: if group.len() == 1 { lead.reactance } else { 1.0 / admittance },
            conductor: lead.conductor.clone(),
            length_km: lead.length_km,
            voltage_kv: lead.voltage_kv,
            static_rating: group.iter().map(|l| l.static_rating).sum(),
        });
    }
    lines.sort_by_key(|l| l.id);

    let generators = case
        .generators
        .iter()
        .map(|g| {
            let mut g = g.clone();
            g.bus = bus_map[&g.bus];
            g
        })
        .collect();
    let reference = bus_map[&case.reference_bus];
    match GridCase::new(buses, lines, generators, Some(reference)) {
        Ok(reduced) => Ok(Aggregation {
            case: reduced.with_base_mva(case.base_mva),
            bus_map,
        }),
        Err(CaseError::Disconnected { islands }) => {
            let main = islands.iter().map(Vec::len).max().unwrap_or(0);
            let isolated = islands
                .into_iter()
                .filter(|isl| isl.len() < main)
                .flatten()
                .collect();
            Err(ReductionError::Disconnected { isolated })
        }
        Err(e) => Err(e.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::tests::{bus, line, thermal};
    use proptest::prelude::*;

    /// Central angle from the dot product of unit vectors.
    fn chord_oracle(a: GeoPoint, b: GeoPoint) -> f64 {
        let v = |p: GeoPoint| {
            let (la, lo) = (p.latitude.to_radians(), p.longitude.to_radians());
            [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
        };
        let (x, y) = (v(a), v(b));
        let dot: f64 = x.iter().zip(&y).map(|(p, q)| p * q).sum();
        EARTH_RADIUS_KM * dot.clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn haversine_known_distances() {
        let houston = GeoPoint::new(29.76, -95.37);
        let dallas = GeoPoint::new(32.78, -96.80);
        assert_eq!(haversine(houston, houston, EARTH_RADIUS_KM), 0.0);
        let d = haversine(houston, dallas, EARTH_RADIUS_KM);
        assert!((d - chord_oracle(houston, dallas)).abs() < 1e-6);
        assert!((d - 361.0).abs() < 2.0, "{d}");
        let anti = haversine(GeoPoint::new(10.0, 20.0), GeoPoint::new(-10.0, -160.0), EARTH_RADIUS_KM);
        // the formula loses half the digits at the antipode
        assert!((anti - std::f64::consts::PI * EARTH_RADIUS_KM).abs() < 1e-3, "{anti}");
    }

    #[test]
    fn bearing_cardinal_directions() {
        let o = GeoPoint::new(30.0, -97.0);
        assert!((bearing(o, GeoPoint::new(31.0, -97.0)) - 0.0).abs() < 1e-9);
        assert!((bearing(o, GeoPoint::new(29.0, -97.0)) - 180.0).abs() < 1e-9);
        assert!((bearing(o, GeoPoint::new(30.0, -96.0)) - 90.0).abs() < 0.5);
    }

    fn brute_force(points: &[(BusId, GeoPoint)], k: usize) -> f64 {
        let n = points.len();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let meds: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            let total: f64 = points
                .iter()
                .map(|p| {
                    meds.iter()
                        .map(|&m| haversine(p.1, points[m].1, EARTH_RADIUS_KM))
                        .fold(f64::INFINITY, f64::min)
                })
                .sum();
            best = best.min(total);
        }
        best
    }

    fn two_groups() -> Vec<(BusId, GeoPoint)> {
        let mut pts = Vec::new();
        for i in 0..5 {
            let f = i as f64 * 0.05;
            pts.push((i + 1, GeoPoint::new(30.0 + f, -97.0 + f * f)));
            pts.push((i + 11, GeoPoint::new(33.0 - f * f, -101.0 + f)));
        }
        pts
    }

    #[test]
    fn every_point_its_own_medoid() {
        let pts = two_groups();
        let c = kmedoids(&pts, pts.len(), 3).unwrap();
        assert_eq!(c.total_distance, 0.0);
        assert!(c.assignment.iter().all(|(b, m)| b == m));
    }

    #[test]
    fn two_groups_pick_group_medoids() {
        let pts = two_groups();
        let c = kmedoids(&pts, 2, 11).unwrap();
        assert!((c.total_distance - brute_force(&pts, 2)).abs() < 1e-9);
        // one medoid per group
        assert!(c.medoids[0] <= 5 && c.medoids[1] >= 11);
    }

    #[test]
    fn single_medoid_minimizes_total_distance() {
        let pts = two_groups();
        let c = kmedoids(&pts, 1, 0).unwrap();
        let best = pts
            .iter()
            .min_by(|a, b| {
                let s = |p: &(BusId, GeoPoint)| pts.iter().map(|q| haversine(p.1, q.1, EARTH_RADIUS_KM)).sum::<f64>();
                s(a).total_cmp(&s(b))
            })
            .unwrap();
        assert_eq!(c.medoids, vec![best.0]);
    }

    #[test]
    fn k_out_of_range() {
        let pts = two_groups();
        assert!(matches!(kmedoids(&pts, 0, 1), Err(ReductionError::KOutOfRange { .. })));
        assert!(matches!(kmedoids(&pts, 11, 1), Err(ReductionError::KOutOfRange { .. })));
    }

    #[test]
    fn deterministic_for_seed() {
        let pts = two_groups();
        assert_eq!(kmedoids(&pts, 3, 5).unwrap(), kmedoids(&pts, 3, 5).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn small_instances_reach_brute_force(
            coords in prop::collection::vec((29.0f64..34.0, -104.0f64..-94.0), 4..=10),
            k in 1usize..=3,
            seed in any::<u64>(),
        ) {
            let pts: Vec<(BusId, GeoPoint)> = coords.iter().enumerate()
                .map(|(i, &(la, lo))| (i as BusId + 1, GeoPoint::new(la, lo))).collect();
            let c = kmedoids(&pts, k, seed).unwrap();
            let oracle = brute_force(&pts, k);
            prop_assert!((c.total_distance - oracle).abs() <= 1e-9 * (1.0 + oracle));
            prop_assert!(c.trace.windows(2).all(|w| w[1] <= w[0]));
            for m in &c.medoids {
                prop_assert_eq!(c.assignment[m], *m);
            }
        }

        #[test]
        fn haversine_symmetric(a in (-90f64..90.0, -180f64..180.0), b in (-90f64..90.0, -180f64..180.0)) {
            let (p, q) = (GeoPoint::new(a.0, a.1), GeoPoint::new(b.0, b.1));
            let d1 = haversine(p, q, EARTH_RADIUS_KM);
            prop_assert!(d1 >= 0.0);
            prop_assert!((d1 - haversine(q, p, EARTH_RADIUS_KM)).abs() <= 1e-12 * (1.0 + d1));
        }
    }

    fn four_bus() -> GridCase {
        GridCase::new(
            vec![
                bus(1, 30.0, -97.0, "A"),
                bus(2, 30.01, -97.0, "A"),
                bus(3, 32.0, -97.0, "B"),
                bus(4, 32.01, -97.0, "B"),
            ],
            vec![
                line(1, 1, 2, 0.05, 400.0),
                line(2, 1, 3, 0.2, 100.0),
                line(3, 2, 4, 0.2, 150.0),
                line(4, 3, 4, 0.05, 400.0),
            ],
            vec![thermal(1, 2, 0.0, 100.0, 10.0), thermal(2, 4, 0.0, 50.0, 20.0)],
            None,
        )
        .unwrap()
    }

    #[test]
    fn identity_clustering_keeps_case() {
        let case = four_bus();
        let c = kmedoids(&case_points(&case), 4, 1).unwrap();
        let agg = aggregate(&case, &c, &[]).unwrap();
        assert!(agg.case.approx_eq(&case, 0.0));
    }

    #[test]
    fn parallel_lines_merge() {
        let case = four_bus();
        let c = kmedoids(&case_points(&case), 2, 1).unwrap();
        let agg = aggregate(&case, &c, &[]).unwrap();
        assert_eq!(agg.case.buses.len(), 2);
        assert_eq!(agg.case.lines.len(), 1);
        let l = &agg.case.lines[0];
        assert!((l.reactance - 0.1).abs() < 1e-12);
        assert_eq!(l.static_rating, 250.0);
        assert_eq!(l.id, 2);
        assert!((agg.case.total_capacity() - case.total_capacity()).abs() < 1e-12);
        let loads: BTreeMap<BusId, f64> = [(1, 10.0), (2, 20.0), (3, 30.0), (4, 40.0)].into();
        let moved = agg.rehome(&loads).unwrap();
        assert!((moved.values().sum::<f64>() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn kept_bus_stays() {
        let case = four_bus();
        let c = kmedoids(&case_points(&case), 2, 1).unwrap();
        let kept = *c.members(c.medoids[0]).iter().find(|b| !c.medoids.contains(b)).unwrap();
        let agg = aggregate(&case, &c, &[kept]).unwrap();
        assert_eq!(agg.case.buses.len(), 3);
        assert_eq!(agg.bus_map[&kept], kept);
        assert_eq!(agg.case.islands().len(), 1);
    }
}
