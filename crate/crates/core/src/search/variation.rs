//! Random test construction, selection, crossover and mutation.

use crate::executor::TestCase;
use crate::minilang::{MethodRef, Program, ScalarType, Value};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Values that commonly sit on the edge of arithmetic behavior.
pub const BOUNDARY_INTS: [i64; 16] = [
    0,
    1,
    -1,
    i64::MIN,
    i64::MAX,
    i32::MIN as i64,
    i32::MAX as i64,
    1 << 8,
    1 << 16,
    -(1 << 16),
    1 << 30,
    -(1 << 30),
    1 << 31,
    1 << 32,
    u32::MAX as i64,
    255,
];

/// Orders of magnitude for Gaussian integer steps.
const STEP_SCALES: [f64; 7] = [1.0, 4.0, 16.0, 100.0, 1e4, 1e6, 1e9];

pub fn random_int(rng: &mut ChaCha8Rng) -> i64 {
    let roll: f64 = rng.random();
    if roll < 0.1 {
        0
    } else if roll < 0.2 {
        if rng.random::<bool>() {
            1
        } else {
            -1
        }
    } else if roll < 0.6 {
        rng.random_range(-100..=100)
    } else if roll < 0.8 {
        BOUNDARY_INTS[rng.random_range(0..BOUNDARY_INTS.len())]
    } else {
        rng.random()
    }
}

pub fn random_value(ty: ScalarType, rng: &mut ChaCha8Rng) -> Value {
    match ty {
        ScalarType::Int => Value::Int(random_int(rng)),
        ScalarType::Bool => Value::Bool(rng.random()),
    }
}

/// A call to a uniformly chosen method of `class` with fresh arguments.
pub fn random_test(program: &Program, class: usize, rng: &mut ChaCha8Rng) -> TestCase {
    let methods = &program.classes[class].methods;
    let method = rng.random_range(0..methods.len());
    let args = methods[method].param_types().map(|t| random_value(t, rng)).collect();
    TestCase {
        method: MethodRef { class, method },
        args,
    }
}

pub fn apply_delta(v: Value, delta: i64) -> Value {
    match v {
        Value::Int(x) => Value::Int(x.wrapping_add(delta)),
        Value::Bool(b) => Value::Bool(b ^ (delta % 2 != 0)),
    }
}

pub fn mutate_value(v: Value, rng: &mut ChaCha8Rng) -> Value {
    match v {
        Value::Bool(b) => Value::Bool(!b),
        Value::Int(_) => {
            let roll: f64 = rng.random();
            if roll < 0.7 {
                let scale = STEP_SCALES[rng.random_range(0..STEP_SCALES.len())];
                let step = Normal::new(0.0, scale).expect("positive scale").sample(rng).round();
                let step = if step == 0.0 {
                    if rng.random::<bool>() {
                        1
                    } else {
                        -1
                    }
                } else {
                    step as i64
                };
                apply_delta(v, step)
            } else if roll < 0.85 {
                Value::Int(BOUNDARY_INTS[rng.random_range(0..BOUNDARY_INTS.len())])
            } else {
                Value::Int(random_int(rng))
            }
        }
    }
}

/// Mutate each argument independently with probability `rate`.
pub fn mutate(test: &mut TestCase, rate: f64, rng: &mut ChaCha8Rng) {
    for arg in test.args.iter_mut() {
        if rng.random_bool(rate) {
            *arg = mutate_value(*arg, rng);
        }
    }
}

/// Single-point argument crossover between tests of the same method.
pub fn crossover(a: &TestCase, b: &TestCase, rng: &mut ChaCha8Rng) -> (TestCase, TestCase) {
    if a.method != b.method || a.args.len() < 2 {
        return (a.clone(), b.clone());
    }
    let cut = rng.random_range(1..a.args.len());
    let mut c = a.clone();
    let mut d = b.clone();
    c.args[cut..].copy_from_slice(&b.args[cut..]);
    d.args[cut..].copy_from_slice(&a.args[cut..]);
    (c, d)
}

/// Binary tournament: lower rank wins, then larger crowding distance,
/// then the earlier individual.
pub fn tournament(rank: &[usize], crowding: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let a = rng.random_range(0..rank.len());
    let b = rng.random_range(0..rank.len());
    let better = |x: usize, y: usize| {
        rank[x]
            .cmp(&rank[y])
            .then(crowding[y].total_cmp(&crowding[x]))
            .then(x.cmp(&y))
    };
    if better(a, b).is_le() {
        a
    } else {
        b
    }
}

/// Produce `count` offspring from the ranked parents.
pub fn vary(
    parents: &[TestCase],
    rank: &[usize],
    crowding: &[f64],
    count: usize,
    crossover_rate: f64,
    mutation_rate: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<TestCase> {
    let mut out = Vec::with_capacity(count + 1);
    while out.len() < count {
        let p1 = &parents[tournament(rank, crowding, rng)];
        let p2 = &parents[tournament(rank, crowding, rng)];
        let (mut c1, mut c2) = if rng.random_bool(crossover_rate) {
            crossover(p1, p2, rng)
        } else {
            (p1.clone(), p2.clone())
        };
        mutate(&mut c1, mutation_rate, rng);
        mutate(&mut c2, mutation_rate, rng);
        out.push(c1);
        out.push(c2);
    }
    out.truncate(count);
    out
}
