//! Bit-parallel evaluation on exhaustive multiplexer tables.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stackgp::genome::{generate_tree, InitMethod};
use stackgp::interp::{eval_bool_packed, eval_oracle, fitness_classification, EvalConfig, OpPolicy, ProgramRef, BackendKind};
use stackgp::lgp::rpn_to_lgp;
use stackgp::problems::{gen_multiplexer, multiplexer_output, multiplexer_solution, ProblemData};

/// Truth table computed here: address bits are the low `k` bits of the
/// case index, data bit `a` sits at index `k + a`.
fn mux_target(k: usize, case: usize) -> bool {
    let address = case % (1 << k);
    (case >> (k + address)) & 1 == 1
}

#[test]
fn truth_tables() {
    for k in 2..=3 {
        let p = gen_multiplexer(k).unwrap();
        let ProblemData::Packed(bits) = p.data() else { panic!() };
        for c in 0..p.num_cases() {
            assert_eq!(bits.target_bit(c), mux_target(k, c));
            assert_eq!(multiplexer_output(k, c), mux_target(k, c));
        }
    }
}

#[test]
fn solutions_score_zero_packed_and_scalar() {
    let cfg = EvalConfig::new(BackendKind::BoolPacked);
    for k in 2..=4 {
        let p = gen_multiplexer(k).unwrap();
        let ProblemData::Packed(bits) = p.data() else { panic!() };
        let g = multiplexer_solution(k);
        assert_eq!(eval_bool_packed(ProgramRef::Tree(&g), bits, &cfg).unwrap().fitness, 0.0);
        let lgp = rpn_to_lgp(&g);
        assert_eq!(eval_bool_packed(ProgramRef::Linear(&lgp), bits, &cfg).unwrap().fitness, 0.0);
    }
}

#[test]
fn random_programs_agree_with_scalar_truthiness() {
    let cfg = EvalConfig::new(BackendKind::BoolPacked);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 2..=3 {
        let p = gen_multiplexer(k).unwrap();
        let ProblemData::Packed(bits) = p.data() else { panic!() };
        let scalar = p.scalar_dataset();
        for i in 0..200 {
            let method = if i % 2 == 0 { InitMethod::Grow } else { InitMethod::Full };
            let g = generate_tree(&mut rng, p.function_set(), method, 2 + i % 5);
            let outs: Vec<f64> = (0..scalar.num_cases())
                .map(|c| eval_oracle(&g, scalar, c, &OpPolicy::default()))
                .collect();
            let want = fitness_classification(&outs, scalar.targets()).unwrap();
            let got = eval_bool_packed(ProgramRef::Tree(&g), bits, &cfg).unwrap();
            assert_eq!(got.fitness, want, "`{g}`");
            assert_eq!(got.nodes_evaluated, (g.size() * p.num_cases()) as u64);
        }
    }
}

#[test]
fn hex_dump_of_six_mux() {
    let p = gen_multiplexer(2).unwrap();
    let ProblemData::Packed(bits) = p.data() else { panic!() };
    let dump = bits.hex_dump();
    let lines: Vec<&str> = dump.lines().collect();
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[0], "X0: aaaaaaaa aaaaaaaa");
    assert_eq!(lines[5], "X5: 00000000 ffffffff");
}
