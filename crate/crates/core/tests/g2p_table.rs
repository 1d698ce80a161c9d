use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sstd_core::{to_graphemes, to_phones, G2PTable, PhoneSeq};

const ROWS: [(&str, &str); 27] = [
    ("a", "ɑ"), ("b", "b"), ("d", "d"), ("h", "ʔ"), ("e", "ɛ"), ("i", "i"), ("ch", "ʃ"),
    ("y", "j"), ("o", "ɔ"), ("k", "k"), ("dj", "ɟ"), ("s", "s"), ("r", "ɻ"), ("rr", "r"),
    ("ng", "ŋ"), ("rd", "ɖ"), ("rl", "ɭ"), ("nj", "ɲ"), ("rn", "ɳ"), ("u", "u"), ("f", "f"),
    ("l", "l"), ("m", "m"), ("n", "n"), ("w", "w"), ("p", "p"), ("t", "t"),
];

#[test]
fn every_row_maps_both_ways() {
    let table = G2PTable::kunwinjku();
    assert_eq!(table.pairs().len(), ROWS.len());
    for (g, p) in ROWS {
        assert_eq!(table.phone_of(g), Some(p), "{g}");
        assert_eq!(table.grapheme_of(p), Some(g), "{p}");
        assert_eq!(to_phones(g, &table).unwrap(), PhoneSeq(vec![p.to_owned()]), "{g}");
        assert_eq!(to_graphemes(&[p.to_owned()], &table).unwrap(), g);
    }
    assert_eq!(to_phones("ng", &table).unwrap().to_string(), "ŋ");
}

#[test]
fn generated_orthography_roundtrips() {
    let table = G2PTable::kunwinjku();
    let graphemes: Vec<&str> = ROWS.iter().map(|r| r.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for case in 0..1000 {
        let n = rng.random_range(1..=12);
        let word: String = (0..n).map(|_| *graphemes.choose(&mut rng).unwrap()).collect();
        let phones = to_phones(&word, &table).unwrap();
        assert_eq!(to_graphemes(phones.as_slice(), &table).unwrap(), word, "case {case}");
    }
}
