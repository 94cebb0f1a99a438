use gssd::*;
fn main() {
    let n: usize = std::env::args().nth(1).unwrap().parse().unwrap();
    let sc: f64 = std::env::args().nth(2).unwrap().parse().unwrap();
    let selfonly = std::env::args().nth(3).is_some();
    let s = RngStream::new(1);
    let x: Vec<f64> = s
        .child(0)
        .standard_normals(n)
        .iter()
        .map(|v| sc * v)
        .collect();
    let y: Vec<f64> = s
        .child(1)
        .standard_normals(n)
        .iter()
        .map(|v| sc * v + 0.5)
        .collect();
    let spec = DivergenceSpec::sinkhorn(2.0, 0.1);
    std::fs::write(
        "/tmp/x.txt",
        x.iter()
            .map(|v| format!("{v:e}"))
            .collect::<Vec<_>>()
            .join("\n"),
    )
    .unwrap();
    if !selfonly {
        let t = std::time::Instant::now();
        let r = entropic_ot_1d(
            &Projected1D::new(x.clone()).unwrap(),
            &Projected1D::new(y).unwrap(),
            &spec,
        )
        .unwrap();
        println!("{r:?} {:?}", t.elapsed());
    }
    let t = std::time::Instant::now();
    let r = entropic_ot_1d(
        &Projected1D::new(x.clone()).unwrap(),
        &Projected1D::new(x).unwrap(),
        &spec,
    )
    .unwrap();
    println!("self {r:?} {:?}", t.elapsed());
}
