//! Mandarin pinyin segmentation tables.
//!
//! Syllables are split into at most two phones, an optional initial and a
//! final, using the written (Hanyu Pinyin) forms so that concatenating the
//! split reproduces the input string. `y` and `w` are treated as initials,
//! and ü syllables use the ASCII `v` spelling (`lv`, `nve`). The legal
//! syllable table below is the standard pinyin chart; it is the closed
//! inventory the rest of the pipeline accepts.

/// Initial consonants, digraphs first so longest-prefix matching works.
pub const INITIALS: [&str; 23] = [
    "zh", "ch", "sh", "b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h", "j", "q", "x", "r",
    "z", "c", "s", "y", "w",
];

/// Finals in written form.
pub const FINALS: [&str; 35] = [
    "a", "ai", "an", "ang", "ao", "e", "ei", "en", "eng", "er", "i", "ia", "ian", "iang", "iao",
    "ie", "in", "ing", "iong", "iu", "o", "ong", "ou", "u", "ua", "uai", "uan", "uang", "ue",
    "ui", "un", "uo", "v", "ve", "ê",
];

/// The rest marker used in score files and as the silence phone.
pub const REST_SYMBOL: &str = "-";

/// Legal syllables per initial ("" = zero-initial), from the standard chart.
const SYLLABLE_CHART: [(&str, &str); 24] = [
    ("", "a ai an ang ao e ei en eng er o ou ê"),
    ("b", "a ai an ang ao ei en eng i ian iao ie in ing o u"),
    ("p", "a ai an ang ao ei en eng i ian iao ie in ing o ou u"),
    ("m", "a ai an ang ao e ei en eng i ian iao ie in ing iu o ou u"),
    ("f", "a an ang ei en eng o ou u"),
    (
        "d",
        "a ai an ang ao e ei en eng i ia ian iao ie ing iu ong ou u uan ui un uo",
    ),
    ("t", "a ai an ang ao e eng i ian iao ie ing ong ou u uan ui un uo"),
    (
        "n",
        "a ai an ang ao e ei en eng i ian iang iao ie in ing iu ong ou u uan un uo v ve",
    ),
    (
        "l",
        "a ai an ang ao e ei eng i ia ian iang iao ie in ing iu o ong ou u uan un uo v ve",
    ),
    ("g", "a ai an ang ao e ei en eng ong ou u ua uai uan uang ui un uo"),
    ("k", "a ai an ang ao e en eng ong ou u ua uai uan uang ui un uo"),
    ("h", "a ai an ang ao e ei en eng ong ou u ua uai uan uang ui un uo"),
    ("j", "i ia ian iang iao ie in ing iong iu u uan ue un"),
    ("q", "i ia ian iang iao ie in ing iong iu u uan ue un"),
    ("x", "i ia ian iang iao ie in ing iong iu u uan ue un"),
    (
        "zh",
        "a ai an ang ao e en eng i ong ou u ua uai uan uang ui un uo",
    ),
    ("ch", "a ai an ang ao e en eng i ong ou u uai uan uang ui un uo"),
    (
        "sh",
        "a ai an ang ao e ei en eng i ou u ua uai uan uang ui un uo",
    ),
    ("r", "an ang ao e en eng i ong ou u uan ui un uo"),
    ("z", "a ai an ang ao e ei en eng i ong ou u uan ui un uo"),
    ("c", "a ai an ang ao e en eng i ong ou u uan ui un uo"),
    ("s", "a ai an ang ao e en eng i ong ou u uan ui un uo"),
    ("y", "a an ang ao e i in ing o ong ou u uan ue un"),
    ("w", "a ai an ang ei en eng o u"),
];

/// Split a legal syllable into `(initial, final)`; initial is `""` when the
/// syllable has none. Returns `None` for anything not in the chart.
pub fn segment(syllable: &str) -> Option<(&'static str, &'static str)> {
    for (initial, finals) in SYLLABLE_CHART {
        if let Some(rest) = syllable.strip_prefix(initial) {
            // Zero-initial entry has the empty prefix; only match it whole.
            if initial.is_empty() || !rest.is_empty() {
                if finals.split(' ').any(|f| f == rest) {
                    let fin = FINALS.iter().find(|f| **f == rest)?;
                    return Some((initial, fin));
                }
            }
        }
    }
    None
}

/// All legal syllables, used for nearest-match suggestions.
pub fn legal_syllables() -> impl Iterator<Item = String> {
    SYLLABLE_CHART
        .iter()
        .flat_map(|(initial, finals)| finals.split(' ').map(move |f| format!("{initial}{f}")))
}

/// Levenshtein distance over bytes, small inputs only.
pub(crate) fn edit_distance(a: &str, b: &str) -> usize {
    let (a, b) = (a.as_bytes(), b.as_bytes());
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// The closest legal syllables to `s`, for error messages.
pub fn nearest_syllables(s: &str, count: usize) -> Vec<String> {
    let mut scored: Vec<(usize, String)> = legal_syllables()
        .map(|syl| (edit_distance(s, &syl), syl))
        .collect();
    scored.sort();
    scored.into_iter().take(count).map(|(_, s)| s).collect()
}
