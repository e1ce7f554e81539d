use looptrace::corpus::CORPUS;
use looptrace::lang::{parse, Expr};
use looptrace::semantics::{
    denote, eval_expr, run, Domain, Interpreter, RunOptions, RunStatus, RuntimeErrorKind, Value,
};

fn traced() -> RunOptions {
    RunOptions {
        record_trace: true,
        ..RunOptions::default()
    }
}

#[test]
fn factorial_of_four() {
    let r = parse(
        "routine fact (n: INTEGER) local i: INTEGER; f: INTEGER do
           from i := 1; f := 1 until i > n loop f := f * i; i := i + 1 end
         end",
    )
    .unwrap();
    let out = run(&r, &[Value::Int(4)], RunOptions::default()).unwrap();
    assert!(out.status.is_ok());
    assert_eq!(out.final_state().values[2], Value::Int(24));
    assert_eq!(out.single_loop_iterations(), 4);
}

#[test]
fn product_of_assigned_variables() {
    let r = parse("routine f () local x: INTEGER; y: INTEGER do x := 2; y := 5 end").unwrap();
    let out = run(&r, &[], RunOptions::default()).unwrap();
    let xy = Expr::binary(looptrace::lang::BinOp::Mul, Expr::var("x"), Expr::var("y"));
    assert_eq!(eval_expr(&r, out.final_state(), &xy), Ok(Value::Int(10)));
}

#[test]
fn runtime_errors_and_fuel() {
    let r = parse(
        "routine f (a: ARRAY, d: INTEGER) local x: INTEGER do
           x := 10 div d; x := a[d]
         end",
    )
    .unwrap();
    let status = |d| {
        run(&r, &[Value::Array(vec![1]), Value::Int(d)], RunOptions::default())
            .unwrap()
            .status
    };
    assert!(matches!(status(0), RunStatus::RuntimeError { kind: RuntimeErrorKind::DivByZero, .. }));
    assert!(matches!(status(1), RunStatus::RuntimeError { kind: RuntimeErrorKind::IndexOutOfRange, .. }));

    let spin = parse("routine g () local i: INTEGER do from i := 0 until false loop i := i + 1 end end").unwrap();
    let opts = RunOptions {
        fuel: 5,
        ..RunOptions::default()
    };
    assert!(matches!(run(&spin, &[], opts).unwrap().status, RunStatus::FuelExhausted { .. }));
}

/// Domains small enough for the denotational evaluator.
fn tiny(array_routine: bool) -> Domain {
    if array_routine {
        Domain::new(0, 2, 3).unwrap()
    } else {
        Domain::new(0, 6, 0).unwrap()
    }
}

#[test]
fn denotation_agrees_with_interpreter_on_corpus() {
    for entry in &CORPUS {
        let r = entry.routine().unwrap();
        let d = tiny(entry.domain.array_len_max > 0);
        let fuel = 8;
        let den = denote(&r, &d, fuel);
        let interp = Interpreter::new(&r);
        let mut compared = 0;
        for input in d.inputs(&r.params) {
            if !interp.require_holds(&input) {
                continue;
            }
            let out = interp
                .run(
                    &input,
                    RunOptions {
                        fuel,
                        record_trace: true,
                    },
                )
                .unwrap();
            let start = interp.initial_state(&input).unwrap();
            let denoted = den.trace_from(&start);
            match &out.status {
                // The postcondition is not part of the denotation.
                RunStatus::Ok | RunStatus::ContractViolation { .. } => {
                    let t = denoted.unwrap_or_else(|| panic!("{}: no trace for {input:?}", entry.name));
                    assert_eq!(t.states(), out.trace.as_slice(), "{} on {input:?}", entry.name);
                    compared += 1;
                }
                RunStatus::FuelExhausted { .. } => {
                    assert!(denoted.is_none(), "{}", entry.name);
                    assert!(den.unresolved.contains(&input), "{}", entry.name);
                }
                _ => assert!(denoted.is_none(), "{} on {input:?}", entry.name),
            }
        }
        assert!(compared > 0, "{}", entry.name);
        assert_eq!(den.initial_states, compared + den.unresolved.len(), "{}", entry.name);
    }
}

#[test]
fn corpus_originals_satisfy_contracts_on_their_domains() {
    for entry in &CORPUS {
        let r = entry.routine().unwrap();
        let interp = Interpreter::new(&r);
        let mut max_iterations = 0;
        for input in entry.domain.inputs(&r.params) {
            if !interp.require_holds(&input) {
                continue;
            }
            let out = interp.run(&input, RunOptions::default()).unwrap();
            assert!(out.status.is_ok(), "{} on {input:?}: {}", entry.name, out.status);
            max_iterations = max_iterations.max(out.single_loop_iterations());
        }
        assert!(max_iterations >= entry.max_depth.min(8), "{}", entry.name);
    }
}

#[test]
fn traces_start_at_entry_and_grow_by_assignment() {
    let r = parse("routine f (n: INTEGER) local s: INTEGER do if n > 0 then s := n else check n = 0 end end end")
        .unwrap();
    let pos = run(&r, &[Value::Int(3)], traced()).unwrap();
    assert_eq!(pos.trace.len(), 2);
    let zero = run(&r, &[Value::Int(0)], traced()).unwrap();
    assert_eq!(zero.trace.len(), 1);
}
