//! The single-call baselines: question only, with clues, and with clues and
//! inferences, against a backend that only knows what the prompt shows it.

use abductive_vqa::backends::FnTextGen;
use abductive_vqa::domain::QaInstance;
use abductive_vqa::evalkit::{report, run_ablation, AblationMode, EvalError, ReportFormat};

fn main() -> Result<(), EvalError> {
    let dataset = vec![
        QaInstance::new("a", "img/a.jpg", "What animal is this?")
            .with_answer("cat")
            .with_clues(["a small animal with whiskers"])
            .with_inferences(["the animal is a cat"]),
        QaInstance::new("b", "img/b.jpg", "Is the stove on?")
            .with_answer("yes")
            .with_clues(["a flame burns under the pot"])
            .with_inferences(["the burner is lit"]),
    ];
    // answers from the last line of the prompt that mentions something useful
    let gen = FnTextGen::new("reader", |prompt: &str| {
        let tail = prompt.rsplit("\n\n").next().unwrap_or(prompt);
        Ok(if tail.contains("the animal is a cat") {
            "cat"
        } else if tail.contains("flame") {
            "yes"
        } else {
            "no idea"
        }
        .to_owned())
    });
    for mode in [AblationMode::QuestionOnly, AblationMode::Clues, AblationMode::CluesPlusInferences] {
        let metrics = run_ablation(&dataset, mode, 2, &gen)?;
        println!("== {}", mode.as_str());
        print!("{}", report(&metrics, ReportFormat::Text));
    }
    Ok(())
}
