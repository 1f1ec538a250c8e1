use cokernel::exact_linalg::{snf, IntegerMatrix};
use std::time::Instant;

fn main() {
    let mut state = 0x12345678u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    for n in [8usize, 10, 12, 14, 16] {
        let t0 = Instant::now();
        let trials = 3;
        for _ in 0..trials {
            let mut vals = vec![vec![0i64; n]; n];
            for i in 0..n {
                for j in i..n {
                    let v = (next() & 1) as i64;
                    vals[i][j] = v;
                    vals[j][i] = v;
                }
            }
            let m = IntegerMatrix::from_rows(&vals);
            let f = snf(&m, false);
            std::hint::black_box(f.rank);
        }
        println!("sym {n}x{n}: {:?} per snf", t0.elapsed() / trials);
    }
}
