use clre::corpus::{TokenizedCorpus, Vocabulary};
use clre::embeddings::{train_cbow, train_cbow_monitored, CbowConfig, EmbeddingModel, WordEmbeddings};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sentences(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split_whitespace().map(str::to_owned).collect())
        .collect()
}

fn toy_corpus() -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let words = ["the", "cat", "dog", "sat", "on", "mat", "ran", "to", "a", "park"];
    let mut out = Vec::new();
    let mut total = 0;
    while total < 100 {
        let n = rng.random_range(4..10).min(100 - total);
        out.push((0..n).map(|_| words[rng.random_range(0..words.len())].to_owned()).collect::<Vec<_>>());
        total += n;
    }
    out
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let text = sentences("a b c d e a\nb c a f\ng\nf e d c b a g h");
    let vocab = Vocabulary::build(&text, 1);
    let corpus = TokenizedCorpus::new(&text, &vocab);
    let mut model = EmbeddingModel::random(vocab, 3, 2, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    model.output.apply(|x| *x = rng.random_range(-1.0..1.0));
    for m in &mut model.inputs {
        m.apply(|x| *x = rng.random_range(-1.0..1.0));
    }
    let (value, grad) = model.objective_gradient(&corpus);
    assert!((value - model.log_likelihood(&corpus)).abs() < 1e-12);

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut check = |analytic: f64, plus: f64, minus: f64| {
        let numeric = (plus - minus) / (2.0 * h);
        worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7));
    };
    for i in 0..model.output.len() {
        let orig = model.output[i];
        model.output[i] = orig + h;
        let plus = model.log_likelihood(&corpus);
        model.output[i] = orig - h;
        let minus = model.log_likelihood(&corpus);
        model.output[i] = orig;
        check(grad.output[i], plus, minus);
    }
    for k in 0..model.inputs.len() {
        for i in 0..model.inputs[k].len() {
            let orig = model.inputs[k][i];
            model.inputs[k][i] = orig + h;
            let plus = model.log_likelihood(&corpus);
            model.inputs[k][i] = orig - h;
            let minus = model.log_likelihood(&corpus);
            model.inputs[k][i] = orig;
            check(grad.inputs[k][i], plus, minus);
        }
    }
    assert!(worst < 1e-4, "max relative error {worst:e}");
}

#[test]
fn log_likelihood_increases_every_epoch() {
    let text = toy_corpus();
    assert_eq!(text.iter().map(Vec::len).sum::<usize>(), 100);
    let vocab = Vocabulary::build(&text, 1);
    let corpus = TokenizedCorpus::new(&text, &vocab);
    let config = CbowConfig {
        dim: 10,
        window: 2,
        epochs: 5,
        learning_rate: 0.05,
        ..CbowConfig::default()
    };
    let (_, trace) = train_cbow_monitored(&corpus, vocab, &config).unwrap();
    assert_eq!(trace.len(), 6);
    for w in trace.windows(2) {
        assert!(w[1] > w[0], "log-likelihood trace {trace:?}");
    }
}

#[test]
fn training_twice_gives_identical_matrices() {
    let text = toy_corpus();
    let vocab = Vocabulary::build(&text, 1);
    let corpus = TokenizedCorpus::new(&text, &vocab);
    let config = CbowConfig {
        dim: 8,
        window: 3,
        epochs: 2,
        ..CbowConfig::default()
    };
    let a = train_cbow(&corpus, vocab.clone(), &config).unwrap();
    let b = train_cbow(&corpus, vocab, &config).unwrap();
    assert_eq!(a, b);
}

#[test]
fn embedding_file_round_trip() {
    let words: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    let vectors = DMatrix::from_fn(4, 3, |r, c| (r as f64 - 1.5) * (c as f64 + 0.25) / 7.0);
    let emb = WordEmbeddings::new(Vocabulary::from_ranked_words(words).unwrap(), vectors).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.vec");
    emb.save(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some("3 4"));
    let back = WordEmbeddings::load(&path).unwrap();
    assert_eq!(back.vocab.words(), emb.vocab.words());
    assert!((back.vectors - emb.vectors).abs().max() < 1e-6);
}

#[test]
fn malformed_embedding_row_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.vec");
    std::fs::write(&path, "2 3\nx 1 2 3\ny 1 2\n").unwrap();
    let err = WordEmbeddings::load(&path).unwrap_err();
    assert!(err.is_validation(), "{err}");
}
