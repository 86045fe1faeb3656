//! Fold zero-shot language-model estimates into the feature matrix.
//!
//! A prompt template renders one lunch's features into a question about
//! the postprandial response; the numeric reply becomes an extra feature
//! column. The six-provider hybrid mode appends one column per provider,
//! the v2 mode appends only the best provider's column, and a response
//! cache keyed by provider and prompt hash makes repeat queries free.
//! Everything here runs against scripted mock transports — no network.
//!
//! Run with: cargo run --example llm_hybrid

use glucolens::ensemble::{
    extend_features_with_llm, llm_column_name, HybridMode, BEST_PROVIDER, HYBRID_PROVIDERS,
};
use glucolens::features::{FeatureSetKind, FeatureVector};
use glucolens::llm::{
    build_prompt, default_providers, query, LlmCache, LlmClient, LlmError, LlmPrediction,
    MockReply, MockTransport, PredictionTarget, PromptTemplate,
};

fn provider_config(id: &str) -> glucolens::llm::ProviderConfig {
    default_providers()
        .into_iter()
        .find(|p| p.id == id)
        .expect("provider is registered")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let template = PromptTemplate::builtin();
    // Canonical order for the self-report + glycemic-load set: the fifteen
    // common features, then activity_score and glycemic_load.
    let features = FeatureVector::new(
        FeatureSetKind::SelfGl,
        vec![
            92.0, 96.0, 750.0, 0.0, 31.4, 680.0, 210.0, 8.0, 0.0, 55.0, 820.0, 75.0, 22.0,
            510.0, 0.0, 12.5, 30.9,
        ],
    )?;
    let prompt = build_prompt(&template, &features, PredictionTarget::Auc);
    println!("prompt tail: ...{}", &prompt[prompt.len().saturating_sub(80)..]);

    // One scripted client per provider; replies are plain text with a
    // number somewhere in them, exactly like real model output.
    let mut cache = LlmCache::in_memory();
    let mut predictions: Vec<LlmPrediction> = Vec::new();
    for (i, id) in HYBRID_PROVIDERS.iter().enumerate() {
        let reply = format!("My estimate is about {} mg/dL-min.", 17_000 + 350 * i);
        let mut client = LlmClient::new(provider_config(id), MockTransport::always(&reply));
        predictions.push(query(&mut client, &prompt, &mut cache)?);
    }
    for p in &predictions {
        println!("  {:<22} -> {}", p.provider_id, p.value);
    }

    // The hybrid modes append the columns in a fixed order.
    let (names, values) = extend_features_with_llm(&features, &predictions, HybridMode::GlyHybrid)?;
    println!(
        "gly-hybrid:    {} -> {} columns (added {:?}...)",
        features.values.len(),
        values.len(),
        &names[features.values.len()..features.values.len() + 2],
    );
    let (names_v2, values_v2) =
        extend_features_with_llm(&features, &predictions, HybridMode::GlyHybridV2)?;
    println!(
        "gly-hybrid-v2: {} -> {} columns (added {})",
        features.values.len(),
        values_v2.len(),
        names_v2.last().unwrap(),
    );
    assert_eq!(*names_v2.last().unwrap(), llm_column_name(BEST_PROVIDER));

    // Cache hits skip the transport entirely.
    let mut counting = LlmClient::new(
        provider_config(BEST_PROVIDER),
        MockTransport::always("should never be needed: 1"),
    );
    let hit = query(&mut counting, &prompt, &mut cache)?;
    println!("cache hit for {}: cached = {}", hit.provider_id, hit.cached);

    // A reply with no number at all surfaces as a refusal, not a zero.
    let mut refusing = LlmClient::new(
        provider_config(BEST_PROVIDER),
        MockTransport::script(vec![MockReply::Text(
            "I cannot responsibly estimate glucose levels.".into(),
        )]),
    );
    let mut empty_cache = LlmCache::in_memory();
    match query(&mut refusing, &prompt, &mut empty_cache) {
        Err(LlmError::RefusedPrediction { provider_id }) => {
            println!("refusal surfaced for {provider_id}");
        }
        other => panic!("expected a refusal, got {other:?}"),
    }
    Ok(())
}
