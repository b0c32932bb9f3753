//! The full pipeline over the bundled 12-item mock dataset.

use std::path::Path;

use abductive_vqa::backends::MockScript;
use abductive_vqa::evalkit::{load_dataset, report, run_pipeline, Backends, PipelineConfig, ReportFormat};
use abductive_vqa::reasoner::explain;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let dataset = load_dataset(&fixtures.join("mock12.jsonl"))?;
    let script = MockScript::load(&fixtures.join("mock_script.json"))?;
    let text = script.text_backend("mock");
    let nli = script.nli_backend("mock")?;

    let run = run_pipeline(&dataset, &PipelineConfig::default(), Backends { text: &text, clues: None, nli: &nli })?;
    for item in run.items.iter().take(3) {
        if let Some(trace) = &item.trace {
            println!("{}: {}\n{}\n", item.record.id, item.record.question, explain(&trace.prediction));
        }
    }
    print!("{}", report(&run.metrics, ReportFormat::Text));
    Ok(())
}
