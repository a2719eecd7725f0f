use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// NFC normalization followed by lowercase folding.
pub fn normalize(text: &str) -> String {
    text.nfc().collect::<String>().to_lowercase()
}

fn is_word_char(c: char) -> bool {
    c.is_alphabetic() || is_combining_mark(c)
}

/// Character n-grams of orders `n_min..=n_max` over space-padded words.
///
/// Words are maximal runs of letters and combining marks, so digits and
/// punctuation act as boundaries. Grams made only of padding are dropped.
/// The input is expected to be normalized already.
pub fn extract_ngrams(normalized: &str, n_min: usize, n_max: usize) -> Vec<String> {
    let mut grams = Vec::new();
    let mut word: Vec<char> = Vec::new();
    let flush = |word: &mut Vec<char>, grams: &mut Vec<String>| {
        if word.is_empty() {
            return;
        }
        let mut padded = Vec::with_capacity(word.len() + 2);
        padded.push(' ');
        padded.append(word);
        padded.push(' ');
        for n in n_min..=n_max {
            if n > padded.len() {
                break;
            }
            for w in padded.windows(n) {
                if w.iter().all(|&c| c == ' ') {
                    continue;
                }
                grams.push(w.iter().collect());
            }
        }
    };
    for c in normalized.chars() {
        if is_word_char(c) {
            word.push(c);
        } else {
            flush(&mut word, &mut grams);
        }
    }
    flush(&mut word, &mut grams);
    grams
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grams_of_short_word() {
        let g = extract_ngrams("ab", 1, 3);
        assert_eq!(g, ["a", "b", " a", "ab", "b ", " ab", "ab "]);
    }

    #[test]
    fn punctuation_and_digits_split_words() {
        assert_eq!(extract_ngrams("a1b", 1, 1), ["a", "b"]);
        assert!(extract_ngrams("123 !?", 1, 3).is_empty());
    }

    #[test]
    fn normalization_folds_case_and_composes() {
        assert_eq!(normalize("E\u{0301}COLE"), "école");
    }
}
