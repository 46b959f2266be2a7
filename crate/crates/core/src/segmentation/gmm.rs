//! RGB Gaussian mixtures with hard component assignment.

const LOG_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: [f64; 3],
    pub cov: [[f64; 3]; 3],
    inv: [[f64; 3]; 3],
    log_det: f64,
}

impl Component {
    fn new(weight: f64, mean: [f64; 3], cov: [[f64; 3]; 3]) -> Option<Self> {
        let (inv, det) = invert3(&cov)?;
        (det > 0.0).then(|| Component {
            weight,
            mean,
            cov,
            inv,
            log_det: det.ln(),
        })
    }

    /// `-log(weight * N(z | mean, cov))`.
    pub fn cost(&self, z: &[f64]) -> f64 {
        let d = [z[0] - self.mean[0], z[1] - self.mean[1], z[2] - self.mean[2]];
        let mut q = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                q += d[i] * self.inv[i][j] * d[j];
            }
        }
        -self.weight.ln() + 0.5 * (self.log_det + q + 3.0 * LOG_2PI)
    }
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<([[f64; 3]; 3], f64)> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if !(det.abs() > 0.0) || !det.is_finite() {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = ((j + 1) % 3, (j + 2) % 3);
            let (c, d) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (m[a][c] * m[b][d] - m[a][d] * m[b][c]) / det;
        }
    }
    Some((inv, det))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gmm {
    components: Vec<Component>,
}

impl Gmm {
    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Cost and index of the cheapest component.
    pub fn best(&self, z: &[f64]) -> (f64, usize) {
        self.components
            .iter()
            .enumerate()
            .map(|(k, c)| (c.cost(z), k))
            .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
    }

    pub fn cost(&self, z: &[f64]) -> f64 {
        self.best(z).0
    }

    /// Maximum-likelihood parameters for a fixed assignment; `var_floor` is
    /// added to every covariance diagonal. Empty components are dropped.
    pub fn fit_assigned(samples: &[[f64; 3]], assignment: &[usize], k: usize, var_floor: f64) -> Option<Gmm> {
        let n = samples.len();
        if n == 0 {
            return None;
        }
        let mut count = vec![0usize; k];
        let mut sum = vec![[0.0; 3]; k];
        for (z, &a) in samples.iter().zip(assignment) {
            count[a] += 1;
            for c in 0..3 {
                sum[a][c] += z[c];
            }
        }
        let means: Vec<[f64; 3]> = (0..k)
            .map(|j| {
                let m = count[j].max(1) as f64;
                [sum[j][0] / m, sum[j][1] / m, sum[j][2] / m]
            })
            .collect();
        let mut cov = vec![[[0.0; 3]; 3]; k];
        for (z, &a) in samples.iter().zip(assignment) {
            let d = [z[0] - means[a][0], z[1] - means[a][1], z[2] - means[a][2]];
            for i in 0..3 {
                for j in 0..3 {
                    cov[a][i][j] += d[i] * d[j];
                }
            }
        }
        let mut components = Vec::new();
        for j in 0..k {
            if count[j] == 0 {
                continue;
            }
            let m = count[j] as f64;
            let mut c = cov[j];
            for (i, row) in c.iter_mut().enumerate() {
                for v in row.iter_mut() {
                    *v /= m;
                }
                row[i] += var_floor;
            }
            components.push(Component::new(m / n as f64, means[j], c)?);
        }
        Some(Gmm { components })
    }

    /// Deterministic farthest-point seeding followed by a few k-means rounds,
    /// then a maximum-likelihood fit on the resulting clusters.
    pub fn fit(samples: &[[f64; 3]], k: usize, var_floor: f64) -> Option<Gmm> {
        if samples.is_empty() {
            return None;
        }
        let dist = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|c| (a[c] - b[c]).powi(2)).sum::<f64>();
        let mut centers = vec![samples[0]];
        while centers.len() < k {
            let (far, d) = samples
                .iter()
                .map(|z| centers.iter().map(|c| dist(z, c)).fold(f64::INFINITY, f64::min))
                .enumerate()
                .fold((0, -1.0), |a, (i, d)| if d > a.1 { (i, d) } else { a });
            if d <= 0.0 {
                break;
            }
            centers.push(samples[far]);
        }
        let mut assign = vec![0; samples.len()];
        for _ in 0..10 {
            for (a, z) in assign.iter_mut().zip(samples) {
                *a = (0..centers.len())
                    .min_by(|&i, &j| dist(z, &centers[i]).total_cmp(&dist(z, &centers[j])))
                    .unwrap_or(0);
            }
            let mut sum = vec![[0.0; 3]; centers.len()];
            let mut count = vec![0usize; centers.len()];
            for (z, &a) in samples.iter().zip(&assign) {
                count[a] += 1;
                for c in 0..3 {
                    sum[a][c] += z[c];
                }
            }
            for (j, c) in centers.iter_mut().enumerate() {
                if count[j] > 0 {
                    *c = [sum[j][0] / count[j] as f64, sum[j][1] / count[j] as f64, sum[j][2] / count[j] as f64];
                }
            }
        }
        Gmm::fit_assigned(samples, &assign, centers.len(), var_floor)
    }

    /// Refit keeping each sample's current cheapest component.
    pub fn refit(&self, samples: &[[f64; 3]], var_floor: f64) -> Option<Gmm> {
        let assign: Vec<usize> = samples.iter().map(|z| self.best(z).1).collect();
        Gmm::fit_assigned(samples, &assign, self.components.len(), var_floor)
    }
}
