/// Erlang loss probability `B(servers, offered_load)` by the recursion
/// `B(0) = 1`, `B(k) = a·B(k−1) / (k + a·B(k−1))`.
pub fn erlang_b(servers: u32, offered_load: f64) -> f64 {
    (1..=servers).fold(1.0, |b, k| {
        let ab = offered_load * b;
        ab / (k as f64 + ab)
    })
}
