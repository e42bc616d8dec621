use bellows::net::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() {
    let mut rng = StdRng::seed_from_u64(1);
    let m = SurrogateModel::new(3, 0.02, Boundaries::default(), Head::Pinc, 2, 8, &mut rng);
    let txt = m.to_json().unwrap();
    let back = SurrogateModel::from_json(&txt).unwrap();
    for (i, (a, b)) in back.core.layers.iter().zip(&m.core.layers).enumerate() {
        let dw = (a.w.clone() - &b.w).abs().max();
        println!("layer {i}: dw={dw:e} shapes {}x{} vs {}x{}", a.w.nrows(), a.w.ncols(), b.w.nrows(), b.w.ncols());
        if dw > 0.0 {
            println!("  a row0: {:?}", a.w.row(0).iter().take(3).collect::<Vec<_>>());
            println!("  b row0: {:?}", b.w.row(0).iter().take(3).collect::<Vec<_>>());
        }
    }
}
