//! Best-path decoding without a language model.

use crate::alphabet::{Alphabet, WordConvention};
use crate::error::{Error, Result};
use crate::float::LogFloat;
use crate::path::{squash_labels, Path, Transcription};
use crate::posterior::PosteriorMatrix;

/// Per-frame argmax. Ties go to the lowest label index, so blank wins ties.
pub fn greedy_path<F: LogFloat>(post: &PosteriorMatrix<F>) -> Path {
    Path(post.rows().map(argmax).collect())
}

fn argmax<F: LogFloat>(row: &[F]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

pub fn greedy_decode<F: LogFloat>(post: &PosteriorMatrix<F>, alphabet: &Alphabet) -> Result<Transcription> {
    if post.labels() != alphabet.len() {
        return Err(Error::invalid(format!(
            "posteriors have {} labels, alphabet has {}",
            post.labels(),
            alphabet.len()
        )));
    }
    Ok(Transcription(squash_labels(&greedy_path(post).0)))
}

/// Splits a transcription into words under the alphabet's boundary convention.
pub fn render_words(z: &Transcription, alphabet: &Alphabet) -> Result<Vec<String>> {
    let convention = alphabet
        .convention()
        .ok_or_else(|| Error::Unsupported("alphabet declares no word-boundary convention".into()))?;
    let mut words = Vec::new();
    let mut current = String::new();
    for &k in z.labels() {
        let sym = alphabet
            .symbol(k)
            .ok_or_else(|| Error::invalid(format!("label {k} is outside the alphabet")))?;
        match convention {
            WordConvention::Space => {
                if Some(k) == alphabet.space_index() {
                    if !current.is_empty() {
                        words.push(std::mem::take(&mut current));
                    }
                    continue;
                }
                current.push_str(sym);
            }
            WordConvention::Case => {
                let starts_word = sym.chars().next().is_some_and(char::is_uppercase);
                if starts_word && !current.is_empty() {
                    words.push(std::mem::take(&mut current));
                }
                current.push_str(&sym.to_lowercase());
            }
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    Ok(words)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{for_each_path, path_probability};
    use proptest::prelude::*;

    #[test]
    fn fixture_decodes_to_a() {
        let alpha = Alphabet::from_chars("ab").unwrap();
        let post = PosteriorMatrix::<f64>::from_probs(&[[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.7, 0.2, 0.1]])
            .unwrap();
        assert_eq!(greedy_path(&post).0, vec![0, 1, 0]);
        assert_eq!(greedy_decode(&post, &alpha).unwrap().render(&alpha), "a");
    }

    #[test]
    fn blank_dominant_and_single_frame() {
        let alpha = Alphabet::from_chars("ab").unwrap();
        let post = PosteriorMatrix::<f32>::from_probs(&[[0.9, 0.05, 0.05]; 4]).unwrap();
        assert!(greedy_decode(&post, &alpha).unwrap().is_empty());
        let one = PosteriorMatrix::<f32>::from_probs(&[[0.1, 0.2, 0.7]]).unwrap();
        assert_eq!(greedy_decode(&one, &alpha).unwrap().0, vec![2]);
    }

    #[test]
    fn ties_prefer_blank() {
        let post = PosteriorMatrix::<f64>::from_probs(&[[0.4, 0.4, 0.2], [0.2, 0.4, 0.4]]).unwrap();
        assert_eq!(greedy_path(&post).0, vec![0, 1]);
    }

    #[test]
    fn render_case_and_space() {
        let case = Alphabet::new(["<blk>", "T", "h", "e", "C", "a", "t"])
            .unwrap()
            .with_convention(WordConvention::Case)
            .unwrap();
        let z = Transcription(vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(render_words(&z, &case).unwrap(), vec!["the", "cat"]);
        let space = Alphabet::from_chars("thec a").unwrap();
        let z = Transcription(space.encode_chars("the cat").unwrap());
        assert_eq!(render_words(&z, &space).unwrap(), vec!["the", "cat"]);
        assert!(render_words(&Transcription::default(), &space).unwrap().is_empty());
    }

    #[test]
    fn render_without_convention() {
        let alpha = Alphabet::from_chars("ab").unwrap();
        assert!(matches!(
            render_words(&Transcription(vec![1]), &alpha),
            Err(Error::Unsupported(_))
        ));
    }

    fn matrix_strategy() -> impl Strategy<Value = PosteriorMatrix<f64>> {
        (1usize..=5, 2usize..=4).prop_flat_map(|(t, k)| {
            proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, k), t).prop_map(|rows| {
                let rows: Vec<Vec<f64>> = rows
                    .into_iter()
                    .map(|r| {
                        let s: f64 = r.iter().sum();
                        r.into_iter().map(|v| v / s).collect()
                    })
                    .collect();
                PosteriorMatrix::from_probs(&rows).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn greedy_path_is_optimal(post in matrix_strategy()) {
            let best = path_probability(&greedy_path(&post), &post).unwrap();
            let mut max = f64::NEG_INFINITY;
            for_each_path(post.frames(), post.labels(), |p| {
                let lp = path_probability(&Path(p.to_vec()), &post).unwrap();
                if lp > max { max = lp; }
            });
            prop_assert!((best - max).abs() < 1e-12);
        }

        #[test]
        fn invariant_under_monotone_transform(post in matrix_strategy()) {
            // squaring probabilities and renormalizing keeps every row's argmax
            let rows: Vec<Vec<f64>> = post.rows().map(|r| {
                let sq: Vec<f64> = r.iter().map(|v| (2.0 * v).exp()).collect();
                let s: f64 = sq.iter().sum();
                sq.into_iter().map(|v| v / s).collect()
            }).collect();
            let other = PosteriorMatrix::<f64>::from_probs(&rows).unwrap();
            prop_assert_eq!(greedy_path(&post), greedy_path(&other));
        }
    }
}
