//! Parsing, printing and forward-mode differentiation of coefficient
//! expressions.
//!
//! Run with `cargo run --example expressions`.

use goursat2d::expr::parse;

fn main() {
    let source = "x * sin(z1)^2 + exp(-y) * z2 / (1 + z1^2)";
    let e = parse(source, 2).expect("valid expression");
    println!("parsed:  {source}");
    println!("printed: {e}");

    let (x, y, z) = (0.3, 0.7, [0.5, -1.5]);
    let d = e.eval_dual(x, y, &z).expect("finite at this point");
    println!(
        "value {:.12}, d/dz1 {:.12}, d/dz2 {:.12}",
        d.value, d.partials[0], d.partials[1]
    );

    // Central differences agree with the dual partials.
    let h = 1e-6;
    for k in 0..2 {
        let mut zp = z;
        let mut zm = z;
        zp[k] += h;
        zm[k] -= h;
        let fd = (e.eval(x, y, &zp).unwrap() - e.eval(x, y, &zm).unwrap()) / (2.0 * h);
        println!("central difference d/dz{}: {fd:.12}", k + 1);
    }

    for bad in ["z1 +* 2", "sin(z3)", "log(x - 2)"] {
        match parse(bad, 2).map(|e| e.eval(0.5, 0.5, &z)) {
            Err(err) => println!("`{bad}`: parse error: {err}"),
            Ok(Err(err)) => println!("`{bad}`: evaluation fault: {err}"),
            Ok(Ok(v)) => println!("`{bad}` = {v}"),
        }
    }
}
