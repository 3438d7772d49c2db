/// `(id, probability)` pairs, most probable first.
pub type Ranking = Vec<(String, f64)>;

/// Probabilities closer than this sort as ties.
const TIE_RESOLUTION: f64 = 1e12;

/// Sorts descending by probability; ties go to the smaller id.
///
/// Probabilities are bucketed to 1e-12 before comparing so that values which
/// differ only by rounding noise still tie deterministically.
pub fn rank(entries: impl IntoIterator<Item = (String, f64)>) -> Ranking {
    let mut ranking: Ranking = entries.into_iter().collect();
    ranking.sort_by(|(a_id, a), (b_id, b)| {
        let ka = (a * TIE_RESOLUTION).round() as i64;
        let kb = (b * TIE_RESOLUTION).round() as i64;
        kb.cmp(&ka).then_with(|| a_id.cmp(b_id))
    });
    ranking
}
