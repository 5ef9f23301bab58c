use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Toy encryption of round labels. Keys are drawn uniformly from
/// `0..key_space` and randomness uniformly from `0..randomness_space`, so
/// expectations over ciphertexts become exact finite averages.
pub trait EncryptionScheme: Sync {
    fn name(&self) -> &'static str;

    /// Number of keys for a round with `questions` plaintext questions and
    /// `answers` plaintext answers.
    fn key_space(&self, questions: usize, answers: usize) -> Result<usize>;

    fn randomness_space(&self, _questions: usize) -> usize {
        1
    }

    fn ciphertext_space(&self, questions: usize) -> usize {
        questions
    }

    fn answer_ciphertext_space(&self, answers: usize) -> usize {
        answers
    }

    fn encrypt(&self, key: usize, x: usize, r: usize, questions: usize, answers: usize) -> usize;

    fn decrypt(&self, key: usize, c: usize, questions: usize, answers: usize) -> usize;

    fn decrypt_answer(&self, key: usize, alpha: usize, questions: usize, answers: usize) -> usize;
}

/// Ciphertext equals plaintext.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Identity;

/// Fresh uniform pads per round: the question is XORed with one pad and
/// the answer is decrypted with an independent second pad. Needs
/// power-of-two label spaces.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct XorPad;

impl EncryptionScheme for Identity {
    fn name(&self) -> &'static str {
        "identity"
    }

    fn key_space(&self, _questions: usize, _answers: usize) -> Result<usize> {
        Ok(1)
    }

    fn encrypt(&self, _key: usize, x: usize, _r: usize, _questions: usize, _answers: usize) -> usize {
        x
    }

    fn decrypt(&self, _key: usize, c: usize, _questions: usize, _answers: usize) -> usize {
        c
    }

    fn decrypt_answer(&self, _key: usize, alpha: usize, _questions: usize, _answers: usize) -> usize {
        alpha
    }
}

impl EncryptionScheme for XorPad {
    fn name(&self) -> &'static str {
        "xorpad"
    }

    fn key_space(&self, questions: usize, answers: usize) -> Result<usize> {
        for (what, n) in [("question", questions), ("answer", answers)] {
            if !n.is_power_of_two() {
                return Err(Error::UnsupportedLabelSpace(format!(
                    "XOR pad needs a power-of-two {what} space, got {n}"
                )));
            }
        }
        Ok(questions * answers)
    }

    fn encrypt(&self, key: usize, x: usize, _r: usize, _questions: usize, answers: usize) -> usize {
        x ^ (key / answers)
    }

    fn decrypt(&self, key: usize, c: usize, _questions: usize, answers: usize) -> usize {
        c ^ (key / answers)
    }

    fn decrypt_answer(&self, key: usize, alpha: usize, _questions: usize, answers: usize) -> usize {
        alpha ^ (key % answers)
    }
}

/// Scheme selector used in run descriptors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Identity,
    Xorpad,
}

impl Scheme {
    pub fn as_dyn(&self) -> &'static dyn EncryptionScheme {
        match self {
            Scheme::Identity => &Identity,
            Scheme::Xorpad => &XorPad,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn correct(e: &dyn EncryptionScheme, questions: usize, answers: usize) -> bool {
        let keys = e.key_space(questions, answers).unwrap();
        (0..keys).all(|k| {
            (0..questions).all(|x| {
                (0..e.randomness_space(questions)).all(|r| {
                    let c = e.encrypt(k, x, r, questions, answers);
                    c < e.ciphertext_space(questions) && e.decrypt(k, c, questions, answers) == x
                })
            })
        })
    }

    #[test]
    fn decryption_inverts_encryption() {
        for (q, a) in [(1, 1), (2, 2), (4, 2), (2, 8)] {
            assert!(correct(&Identity, q, a));
            assert!(correct(&XorPad, q, a));
        }
        assert!(correct(&Identity, 3, 5));
    }

    #[test]
    fn pad_is_uniform_and_answers_use_a_separate_pad() {
        let e = XorPad;
        let keys = e.key_space(2, 2).unwrap();
        assert_eq!(keys, 4);
        for x in 0..2 {
            let ones = (0..keys).filter(|&k| e.encrypt(k, x, 0, 2, 2) == 1).count();
            assert_eq!(ones, 2);
        }
        let decoded: Vec<usize> = (0..keys).map(|k| e.decrypt_answer(k, 0, 2, 2)).collect();
        assert_eq!(decoded, vec![0, 1, 0, 1]);
        assert!(matches!(e.key_space(3, 2), Err(Error::UnsupportedLabelSpace(_))));
    }

    #[test]
    fn selector_names() {
        let s: Scheme = serde_json::from_str("\"xorpad\"").unwrap();
        assert_eq!(s.as_dyn().name(), "xorpad");
        assert_eq!(Scheme::Identity.as_dyn().name(), "identity");
    }
}
