//! Pose graph with per-edge 6x6 information matrices, the weighted
//! least-squares objective over it, edge D-optimality, and a parametric
//! model of how localization uncertainty grows with travel and shrinks on
//! loop closure.
//!
//! Residuals are ordered `(x, y, z, roll, pitch, yaw)`: translation first,
//! then the rotation vector.

use nalgebra::{Isometry3, Matrix6, SymmetricEigen, Translation3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::Pose2D;

/// Edge covariance dimension.
pub const EDGE_DIM: usize = 6;

pub type Pose3 = Isometry3<f64>;

pub fn pose3_from_2d(p: &Pose2D) -> Pose3 {
    Isometry3::from_parts(
        Translation3::new(p.x, p.y, 0.0),
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), p.theta),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphEdge {
    pub from: usize,
    pub to: usize,
    /// Measured pose of `to` in the frame of `from`.
    pub measurement: Pose3,
    pub omega: Matrix6<f64>,
    /// Residual at the graph's own node estimates when the edge was added.
    pub residual: Vector6<f64>,
}

/// `measured ⊖ predicted`, i.e. `log(predicted⁻¹ · measured)`.
pub fn relative_error(measured: &Pose3, predicted: &Pose3) -> Vector6<f64> {
    let d = predicted.inverse() * measured;
    let t = d.translation.vector;
    let r = d.rotation.scaled_axis();
    Vector6::new(t.x, t.y, t.z, r.x, r.y, r.z)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DOptForm {
    /// Geometric mean of the eigenvalues, `det(Ω)^(1/n)`.
    #[default]
    Normalized,
    /// `exp(log(det Ω)) / n`, i.e. `det(Ω) / n`.
    Literal,
}

/// D-optimality of a symmetric positive-definite 6x6 matrix.
pub fn edge_d_optimality(omega: &Matrix6<f64>, form: DOptForm) -> Result<f64> {
    let eig = spd_eigenvalues(omega)?;
    let log_sum: f64 = eig.iter().map(|l| l.ln()).sum();
    Ok(match form {
        DOptForm::Normalized => (log_sum / EDGE_DIM as f64).exp(),
        DOptForm::Literal => log_sum.exp() / EDGE_DIM as f64,
    })
}

fn spd_eigenvalues(m: &Matrix6<f64>) -> Result<Vector6<f64>> {
    let asym = (m - m.transpose()).abs().max();
    if !(asym <= 1e-9) {
        return Err(Error::NotSpd(format!("asymmetry {asym:e}")));
    }
    let eig = SymmetricEigen::new(*m).eigenvalues;
    if let Some(l) = eig.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::NotSpd(format!("eigenvalue {l:e}")));
    }
    Ok(eig)
}

/// Noise and bookkeeping parameters for the uncertainty model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct UncertaintyParams {
    /// Per-axis noise rate, `(x, y, z, roll, pitch, yaw)`.
    pub sigmas: [f64; 6],
    /// Floor added to an edge's standard deviation.
    pub epsilon: f64,
    /// Ceiling of the reported D-optimality.
    pub d_cap: f64,
    /// Travel since the last closure after which SLAM is reported lost (m).
    pub l_lost: f64,
    /// Fraction of accumulated covariance kept by a loop closure.
    pub retain: f64,
}

impl Default for UncertaintyParams {
    fn default() -> Self {
        Self {
            sigmas: [0.25; 6],
            epsilon: 1e-3,
            d_cap: 10.0,
            l_lost: 25.0,
            retain: 0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoopClosure {
    pub at: usize,
    pub from: usize,
}

#[derive(Clone, Debug)]
pub struct PoseGraph {
    nodes: Vec<Pose3>,
    edges: Vec<GraphEdge>,
    accumulated: Matrix6<f64>,
    distance_since_closure: f64,
    closures: Vec<LoopClosure>,
}

impl PoseGraph {
    pub fn new(start: Pose3) -> Self {
        Self {
            nodes: vec![start],
            edges: Vec::new(),
            accumulated: Matrix6::zeros(),
            distance_since_closure: 0.0,
            closures: Vec::new(),
        }
    }

    pub fn nodes(&self) -> &[Pose3] {
        &self.nodes
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn closures(&self) -> &[LoopClosure] {
        &self.closures
    }

    pub fn last_node(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn add_node(&mut self, pose: Pose3) -> usize {
        self.nodes.push(pose);
        self.nodes.len() - 1
    }

    /// Adds a measurement edge. `omega` must be symmetric positive definite.
    pub fn add_edge(&mut self, from: usize, to: usize, measurement: Pose3, omega: Matrix6<f64>) -> Result<usize> {
        for id in [from, to] {
            if id >= self.nodes.len() {
                return Err(Error::InvalidNode(id));
            }
        }
        spd_eigenvalues(&omega)?;
        let predicted = self.nodes[from].inverse() * self.nodes[to];
        let residual = relative_error(&measurement, &predicted);
        self.edges.push(GraphEdge {
            from,
            to,
            measurement,
            omega,
            residual,
        });
        Ok(self.edges.len() - 1)
    }

    /// Sum over edges of `eᵀ Ω e` evaluated at the poses `x`.
    pub fn objective(&self, x: &[Pose3]) -> Result<f64> {
        let mut total = 0.0;
        for e in &self.edges {
            let from = x.get(e.from).ok_or(Error::MissingPose(e.from))?;
            let to = x.get(e.to).ok_or(Error::MissingPose(e.to))?;
            let predicted = from.inverse() * to;
            let r = relative_error(&e.measurement, &predicted);
            total += (r.transpose() * e.omega * r)[(0, 0)];
        }
        Ok(total)
    }

    pub fn distance_since_closure(&self) -> f64 {
        self.distance_since_closure
    }

    pub fn accumulated_covariance(&self) -> &Matrix6<f64> {
        &self.accumulated
    }

    /// Appends a node reached by `delta` from the last node, with an edge
    /// whose information is `diag(1 / (σ_k d + ε)²)` for translation length `d`.
    /// Accumulated covariance grows by `diag((σ_k d)²)`.
    pub fn propagate_uncertainty(&mut self, delta: Pose3, params: &UncertaintyParams) -> Result<usize> {
        let d = delta.translation.vector.norm();
        let last = self.last_node();
        let pose = self.nodes[last] * delta;
        let next = self.add_node(pose);
        let mut omega = Matrix6::zeros();
        let mut growth = Matrix6::zeros();
        for k in 0..EDGE_DIM {
            let sd = params.sigmas[k] * d;
            omega[(k, k)] = 1.0 / (sd + params.epsilon).powi(2);
            growth[(k, k)] = sd * sd;
        }
        let edge = self.add_edge(last, next, delta, omega)?;
        self.accumulated += growth;
        self.distance_since_closure += d;
        Ok(edge)
    }

    /// Shrinks the accumulated covariance to `retain` of its value and links
    /// the latest node back to `at`.
    pub fn apply_loop_closure(&mut self, at: usize, retain: f64, params: &UncertaintyParams) -> Result<()> {
        if at >= self.nodes.len() {
            return Err(Error::InvalidNode(at));
        }
        if !(0.0..1.0).contains(&retain) {
            return Err(Error::Config(format!("retain must be in [0, 1), got {retain}")));
        }
        let from = self.last_node();
        if from != at {
            let measurement = self.nodes[from].inverse() * self.nodes[at];
            let omega = Matrix6::identity() / (params.epsilon * params.epsilon);
            self.add_edge(from, at, measurement, omega)?;
        }
        self.accumulated *= retain;
        self.distance_since_closure = 0.0;
        self.closures.push(LoopClosure { at, from });
        Ok(())
    }

    pub fn is_lost(&self, params: &UncertaintyParams) -> bool {
        self.distance_since_closure > params.l_lost
    }

    /// D-optimality the agent reports.
    ///
    /// Normalized form: information scale, `min(d_cap, D(C⁻¹))`; a singular
    /// accumulated covariance `C` reports the cap. High values are good.
    ///
    /// Literal form: covariance scale, `min(d_cap, det(C) / n)`; zero after a
    /// full reset. High values are bad.
    pub fn reported_d_opti(&self, params: &UncertaintyParams, form: DOptForm) -> f64 {
        let c = &self.accumulated;
        match form {
            DOptForm::Normalized => {
                let value = c
                    .try_inverse()
                    .and_then(|inv| edge_d_optimality(&symmetrize(&inv), DOptForm::Normalized).ok());
                match value {
                    Some(v) if v.is_finite() => v.min(params.d_cap),
                    _ => params.d_cap,
                }
            }
            DOptForm::Literal => edge_d_optimality(c, DOptForm::Literal)
                .map(|v| v.min(params.d_cap))
                .unwrap_or(0.0),
        }
    }
}

fn symmetrize(m: &Matrix6<f64>) -> Matrix6<f64> {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    fn translation(x: f64, y: f64, z: f64) -> Pose3 {
        Isometry3::translation(x, y, z)
    }

    fn two_node_graph(omega: Matrix6<f64>) -> PoseGraph {
        let mut g = PoseGraph::new(Pose3::identity());
        g.add_node(translation(1.0, 0.0, 0.0));
        g.add_edge(0, 1, Pose3::identity(), omega).unwrap();
        g
    }

    #[test]
    fn objective_zero_for_perfect_fit() {
        let mut g = PoseGraph::new(Pose3::identity());
        let p1 = pose3_from_2d(&Pose2D::new(1.0, 2.0, 0.7));
        g.add_node(p1);
        g.add_edge(0, 1, p1, Matrix6::identity()).unwrap();
        assert!(g.objective(g.nodes()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn objective_unit_residual() {
        let g = two_node_graph(Matrix6::identity());
        let e = &g.edges()[0].residual;
        assert!((e.norm() - 1.0).abs() < 1e-15);
        assert!((g.objective(g.nodes()).unwrap() - 1.0).abs() < 1e-12);

        let doubled = [Pose3::identity(), translation(2.0, 0.0, 0.0)];
        assert!((g.objective(&doubled).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn objective_missing_pose() {
        let g = two_node_graph(Matrix6::identity());
        assert!(matches!(
            g.objective(&[Pose3::identity()]),
            Err(Error::MissingPose(1))
        ));
    }

    #[test]
    fn angle_residual_is_wrapped() {
        let measured = pose3_from_2d(&Pose2D::new(0.0, 0.0, 3.1));
        let predicted = pose3_from_2d(&Pose2D::new(0.0, 0.0, -3.1));
        let e = relative_error(&measured, &predicted);
        // 6.2 rad apart the short way round is 2*pi - 6.2
        assert!((e[5].abs() - (2.0 * std::f64::consts::PI - 6.2)).abs() < 1e-9);
    }

    #[test]
    fn add_edge_validation() {
        let mut g = PoseGraph::new(Pose3::identity());
        assert!(matches!(
            g.add_edge(0, 3, Pose3::identity(), Matrix6::identity()),
            Err(Error::InvalidNode(3))
        ));
        let mut bad = Matrix6::identity();
        bad[(0, 1)] = 0.5;
        g.add_node(Pose3::identity());
        assert!(matches!(
            g.add_edge(0, 1, Pose3::identity(), bad),
            Err(Error::NotSpd(_))
        ));
    }

    #[test]
    fn d_opti_identity_and_scaling() {
        let i = Matrix6::<f64>::identity();
        assert!((edge_d_optimality(&i, DOptForm::Normalized).unwrap() - 1.0).abs() < 1e-12);
        let c = 3.7;
        let v = edge_d_optimality(&(i * c), DOptForm::Normalized).unwrap();
        assert!((v - c).abs() < 1e-12);
        let lit = edge_d_optimality(&(i * 2.0), DOptForm::Literal).unwrap();
        assert!((lit - 64.0 / 6.0).abs() < 1e-9);
    }

    #[test]
    fn d_opti_diag_one_to_six() {
        let m = Matrix6::from_diagonal(&Vector6::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0));
        let expect = (1..=6).map(|k| (k as f64).ln()).sum::<f64>() / 6.0;
        let v = edge_d_optimality(&m, DOptForm::Normalized).unwrap();
        assert!((v - expect.exp()).abs() < 1e-9);
        assert!((v - 2.993795165523909).abs() < 1e-9);
        let lit = edge_d_optimality(&m, DOptForm::Literal).unwrap();
        assert!((lit - 120.0).abs() < 1e-9);
    }

    #[test]
    fn d_opti_rejects_non_spd() {
        let m = Matrix6::from_diagonal(&Vector6::new(1.0, 2.0, 3.0, 4.0, 5.0, 0.0));
        assert!(edge_d_optimality(&m, DOptForm::Normalized).is_err());
        let m = Matrix6::from_diagonal(&Vector6::new(1.0, 2.0, 3.0, 4.0, 5.0, -1.0));
        assert!(edge_d_optimality(&m, DOptForm::Normalized).is_err());
    }

    fn params(sigma: f64) -> UncertaintyParams {
        UncertaintyParams {
            sigmas: [sigma; 6],
            ..Default::default()
        }
    }

    #[test]
    fn fresh_graph_reports_cap() {
        let g = PoseGraph::new(Pose3::identity());
        let p = params(0.3);
        assert_eq!(g.reported_d_opti(&p, DOptForm::Normalized), 10.0);
        assert_eq!(g.reported_d_opti(&p, DOptForm::Literal), 0.0);
    }

    #[test]
    fn doubling_distance_halves_d_opti() {
        let p = params(1.0);
        let step = translation(0.5, 0.0, 0.0);
        let mut g = PoseGraph::new(Pose3::identity());
        for _ in 0..40 {
            g.propagate_uncertainty(step, &p).unwrap();
        }
        // C = 40 * 0.25 I = 10 I -> D = 0.1
        let d1 = g.reported_d_opti(&p, DOptForm::Normalized);
        assert!((d1 - 0.1).abs() < 1e-12);
        for _ in 0..40 {
            g.propagate_uncertainty(step, &p).unwrap();
        }
        let d2 = g.reported_d_opti(&p, DOptForm::Normalized);
        assert!((d2 - d1 / 2.0).abs() < 1e-12);
        assert!((g.distance_since_closure() - 40.0).abs() < 1e-9);
    }

    #[test]
    fn noiseless_robot_stays_at_cap() {
        let p = params(0.0);
        let mut g = PoseGraph::new(Pose3::identity());
        for _ in 0..10_000 {
            g.propagate_uncertainty(translation(0.25, 0.0, 0.0), &p).unwrap();
        }
        assert_eq!(g.reported_d_opti(&p, DOptForm::Normalized), 10.0);
    }

    #[test]
    fn edge_information_follows_step_length() {
        let p = params(0.5);
        let mut g = PoseGraph::new(Pose3::identity());
        let e = g.propagate_uncertainty(translation(2.0, 0.0, 0.0), &p).unwrap();
        let expect = 1.0 / (0.5f64 * 2.0 + 1e-3).powi(2);
        assert!((g.edges()[e].omega[(3, 3)] - expect).abs() < 1e-9);
        assert!(g.edges()[e].residual.norm() < 1e-12);
    }

    #[test]
    fn closure_retains_fraction() {
        let p = params(1.0);
        let mut g = PoseGraph::new(Pose3::identity());
        for _ in 0..20 {
            g.propagate_uncertainty(translation(0.5, 0.0, 0.0), &p).unwrap();
        }
        let c = *g.accumulated_covariance();
        let before = g.reported_d_opti(&p, DOptForm::Normalized);
        g.apply_loop_closure(0, 0.2, &p).unwrap();
        assert!((g.accumulated_covariance() - c * 0.2).abs().max() < 1e-12);
        let after = g.reported_d_opti(&p, DOptForm::Normalized);
        assert!((after - 5.0 * before).abs() < 1e-9);
        assert_eq!(g.distance_since_closure(), 0.0);

        g.apply_loop_closure(0, 0.2, &p).unwrap();
        assert!((g.accumulated_covariance() - c * 0.04).abs().max() < 1e-12);
        assert_eq!(g.closures().len(), 2);

        g.apply_loop_closure(3, 0.0, &p).unwrap();
        assert_eq!(g.reported_d_opti(&p, DOptForm::Normalized), 10.0);
    }

    #[test]
    fn closure_validation() {
        let p = params(1.0);
        let mut g = PoseGraph::new(Pose3::identity());
        assert!(matches!(g.apply_loop_closure(5, 0.2, &p), Err(Error::InvalidNode(5))));
        assert!(g.apply_loop_closure(0, 1.0, &p).is_err());
    }

    #[test]
    fn lost_after_l_lost() {
        let p = UncertaintyParams {
            l_lost: 1.0,
            ..params(0.1)
        };
        let mut g = PoseGraph::new(Pose3::identity());
        g.propagate_uncertainty(translation(0.75, 0.0, 0.0), &p).unwrap();
        assert!(!g.is_lost(&p));
        g.propagate_uncertainty(translation(0.75, 0.0, 0.0), &p).unwrap();
        assert!(g.is_lost(&p));
        g.apply_loop_closure(0, 0.2, &p).unwrap();
        assert!(!g.is_lost(&p));
    }
}
