use super::*;

fn fd_grad(params: &[f64], f: impl Fn(&[f64]) -> f64, h: f64) -> Vec<f64> {
    (0..params.len())
        .map(|j| {
            let mut up = params.to_vec();
            let mut dn = params.to_vec();
            up[j] += h;
            dn[j] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

fn close(a: &[f64], b: &[f64], tol: f64) {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol * scale, "{x} vs {y}");
    }
}

fn sample_points() -> Batch {
    Batch::new(2, vec![0.3, -0.7, 1.1, 0.2, -0.4, 0.9, 0.0, 0.05])
}

#[test]
fn mlp_mixed_derivative_matches_fd() {
    let d = MlpDiscriminator::new(2, &[7, 5]);
    let psi = d.net.init_params(1);
    let x = sample_points();
    let v = Batch::new(2, vec![1.0, 0.5, -0.2, 0.3, 0.0, 1.0, 2.0, -1.0]);
    let w = [0.5, 1.0, -0.3, 2.0];
    let mixed = d.mixed(&x, &psi, &v, &w);
    let f = |p: &[f64]| {
        let g = d.grad_x(&x, p);
        g.rows().zip(v.rows()).zip(&w).map(|((g, v), w)| w * dot(g, v)).sum::<f64>()
    };
    close(&mixed, &fd_grad(&psi, f, 1e-6), 1e-7);
}

#[test]
fn mlp_penalty_gradient_matches_fd() {
    let d = MlpDiscriminator::new(2, &[6, 6, 6]);
    let psi = d.net.init_params(9);
    let x = sample_points();
    let w = [0.25; 4];
    let (norms, grad) = d.grad_norm_sq_and_psi_grad(&x, &psi, &w);
    let f = |p: &[f64]| {
        d.grad_x(&x, p).rows().zip(&w).map(|(g, w)| w * dot(g, g)).sum::<f64>()
    };
    close(&grad, &fd_grad(&psi, f, 1e-6), 1e-7);
    let gx = d.grad_x(&x, &psi);
    for (n, g) in norms.iter().zip(gx.rows()) {
        assert!((n - dot(g, g)).abs() < 1e-15);
    }
    // the default trait route agrees with the fused one
    let (_, default_route) = {
        let g = d.grad_x(&x, &psi);
        let w2: Vec<f64> = w.iter().map(|w| 2.0 * w).collect();
        ((), d.mixed(&x, &psi, &g, &w2))
    };
    close(&grad, &default_route, 1e-12);
}

#[test]
fn mlp_grad_x_and_grad_psi_match_fd() {
    let d = MlpDiscriminator::new(2, &[4]);
    let psi = d.net.init_params(2);
    let x = Batch::new(2, vec![0.2, 0.4]);
    let gx = d.grad_x(&x, &psi);
    let fx = fd_grad(x.as_slice(), |xx| d.value(&Batch::new(2, xx.to_vec()), &psi)[0], 1e-6);
    close(gx.as_slice(), &fx, 1e-8);
    let gp = d.grad_psi(&x, &psi, &[1.0]);
    close(&gp, &fd_grad(&psi, |p| d.value(&x, p)[0], 1e-6), 1e-8);
}

#[test]
fn mlp_generator_vjp_and_jvp_match_fd() {
    let g = MlpGenerator::new(2, &[5, 5], 2);
    let theta = g.net.init_params(4);
    let z = Batch::new(2, vec![0.1, -1.0, 0.7, 0.3]);
    let cot = Batch::new(2, vec![1.0, -0.5, 0.2, 0.9]);
    let vjp = g.vjp(&z, &theta, &cot);
    let f = |t: &[f64]| dot(g.generate(&z, t).as_slice(), cot.as_slice());
    close(&vjp, &fd_grad(&theta, f, 1e-6), 1e-8);
    let dir: Vec<f64> = (0..theta.len()).map(|i| (i % 3) as f64 - 1.0).collect();
    let jvp = g.jvp(&z, &theta, &dir);
    let shift = |s: f64| {
        let t: Vec<f64> = theta.iter().zip(&dir).map(|(a, b)| a + s * b).collect();
        g.generate(&z, &t).into_vec()
    };
    let (up, dn) = (shift(1e-6), shift(-1e-6));
    let fd: Vec<f64> = up.iter().zip(&dn).map(|(u, d)| (u - d) / 2e-6).collect();
    close(jvp.as_slice(), &fd, 1e-7);
}

#[test]
fn toy_discriminator_derivatives() {
    let lin = LinearDiscriminator { dim: 1 };
    let x = Batch::new(1, vec![2.0, -1.0]);
    assert_eq!(lin.value(&x, &[3.0]), vec![6.0, -3.0]);
    assert_eq!(lin.grad_x(&x, &[3.0]).into_vec(), vec![3.0, 3.0]);
    assert_eq!(lin.mixed_matrix(&[5.0], &[3.0])[(0, 0)], 1.0);
    let quad = QuadraticDiscriminator { dim: 1 };
    assert_eq!(quad.value(&x, &[0.5]), vec![2.0, 0.5]);
    assert_eq!(quad.grad_x(&x, &[0.5]).into_vec(), vec![2.0, -1.0]);
    assert_eq!(quad.mixed_matrix(&[1.5], &[0.0])[(0, 0)], 3.0);
    let (norms, g) = quad.grad_norm_sq_and_psi_grad(&x, &[0.5], &[1.0, 1.0]);
    assert_eq!(norms, vec![4.0, 1.0]);
    // d/dψ (4ψ²x²) summed = 8ψ(4 + 1) = 20
    assert_eq!(g, vec![20.0]);
}

#[test]
fn toy_generators() {
    let z = Batch::new(1, vec![0.5, -1.0]);
    let dg = DiracGenerator { dim: 1 };
    assert_eq!(dg.generate(&z, &[2.0]).into_vec(), vec![2.0, 2.0]);
    assert_eq!(dg.vjp(&z, &[2.0], &Batch::new(1, vec![1.0, 3.0])), vec![4.0]);
    let sg = ScaleGenerator { dim: 1 };
    assert_eq!(sg.generate(&z, &[2.0]).into_vec(), vec![1.0, -2.0]);
    assert_eq!(sg.vjp(&z, &[2.0], &Batch::new(1, vec![1.0, 1.0])), vec![-0.5]);
    assert_eq!(sg.jvp(&z, &[2.0], &[3.0]).into_vec(), vec![1.5, -3.0]);
}
