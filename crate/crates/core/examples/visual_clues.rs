//! Visual clues for an instance, permuted fine-tuning records and the
//! trainer manifest.

use abductive_vqa::backends::ScriptedClueGen;
use abductive_vqa::clues::{
    build_clue_prompt, get_clues, permute_clue_records, training_manifest, ClueError, ClueSource, TrainingStage,
};
use abductive_vqa::domain::QaInstance;

fn main() -> Result<(), ClueError> {
    let inst = QaInstance::new("q1", "images/street.jpg", "Is it raining?").with_answer("yes").with_clues([
        "a man holds an open umbrella",
        "the street is wet",
        "the sky is grey",
    ]);

    for c in get_clues(&inst, ClueSource::Gold, None)? {
        println!("{} {}", c.id, c.statement);
    }

    let generator = ScriptedClueGen::new("demo")
        .with_image("images/street.jpg", "- Puddles on the road.\n- puddles on the road\n- A red bus");
    println!("prompt: {}", build_clue_prompt(&inst.question)?);
    for c in get_clues(&inst, ClueSource::Backend, Some(&generator))? {
        println!("{} {} ({:?})", c.id, c.statement, c.origin);
    }

    for r in permute_clue_records(&inst, 7)? {
        println!("target: {}", r.target);
    }
    println!("{}", training_manifest(TrainingStage::TwoStage).to_json());
    Ok(())
}
