//! Exhaustive weight-entanglement oracle: for every subnet of a 3^4 space,
//! the masked supernet forward must equal a standalone network built by
//! slicing the shared weights, to 1e-12.

mod common;

use archshift::autodiff::Value;
use archshift::rng::{RngSet, Stream};
use archshift::space::{policy_from_choices, SearchSpace};
use archshift::supernet::Supernet;

#[test]
fn masked_forward_equals_sliced_subnet_everywhere() {
    let space = SearchSpace::homogeneous(4, &[1, 2, 3]).unwrap();
    let mut rng = RngSet::new(7);
    let net = Supernet::new(&space, 5, 3, rng.stream(Stream::Init)).unwrap();
    let x = common::rand_mat(rng.stream(Stream::Data), 6, 5, -2.0, 2.0);

    let all: Vec<Vec<usize>> = space.enumerate().collect();
    assert_eq!(all.len(), 81);

    let mut worst: f64 = 0.0;
    for choices in &all {
        let policy = policy_from_choices(&space, choices).unwrap();
        let masked = net.forward(&Value::constant(x.clone()), &policy).unwrap().data();
        let sliced = net.slice_subnet(choices).unwrap().forward(&x).unwrap();
        assert_eq!(masked.shape(), sliced.shape());
        for (a, b) in masked.as_slice().iter().zip(sliced.as_slice()) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst <= 1e-12, "max deviation {} across 81 subnets", worst);
}

#[test]
fn gradients_only_reach_unmasked_slices() {
    let space = SearchSpace::homogeneous(2, &[1, 2, 3]).unwrap();
    let mut rng = RngSet::new(11);
    let net = Supernet::new(&space, 4, 2, rng.stream(Stream::Init)).unwrap();
    let x = Value::constant(common::rand_mat(rng.stream(Stream::Data), 3, 4, -1.0, 1.0));

    // narrowest subnet: only the first row/col slices of each layer train
    let policy = policy_from_choices(&space, &[0, 0]).unwrap();
    net.params().zero_grad();
    let loss = net.task_loss(&x, &[0, 1, 0], &policy).unwrap();
    loss.backward().unwrap();

    let grads = net.params().get("layer1.weight").unwrap().value.grad();
    for r in 0..grads.rows() {
        for c in 0..grads.cols() {
            let inside = r < 1 && c < 1;
            if !inside {
                assert_eq!(
                    grads.get(r, c),
                    0.0,
                    "masked-out weight ({}, {}) received gradient",
                    r,
                    c
                );
            }
        }
    }
}
