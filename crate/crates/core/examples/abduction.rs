//! Candidate answers and abduction proposals from a scripted text backend,
//! including a second retrieval round.

use abductive_vqa::abduction::{
    bundled_exemplars, propose_all, propose_answers, serialize_proposal, AbductionConfig, AbductionError,
};
use abductive_vqa::backends::ScriptedTextGen;

fn main() -> Result<(), AbductionError> {
    let question = "Is the road safe to drive on?";
    let gen = ScriptedTextGen::new("demo")
        .with_rule([format!("Question: {question}\nAnswers:")], "- no\n- yes")
        // the first reply for "no" does not say DONE, so a second round is asked for
        .with_rule(
            ["Answer: no\n", "Conditions found so far"],
            "C1: the road is icy\nC3: cars are skidding\nC2 -> C3\nDONE",
        )
        .with_rule(["Answer: no\n"], "C1: the road is icy\nC2: the road is slippery\nC1 -> C2")
        .with_rule(["Answer: yes\n"], "C1: the road is dry\nDONE");

    let cfg = AbductionConfig::default();
    let exemplars = bundled_exemplars();
    let answers = propose_answers(&gen, question, &exemplars, &cfg)?;
    for proposal in propose_all(&gen, question, &answers, &exemplars, &cfg)? {
        println!("{} -> {}", proposal.id(), proposal.answer());
        println!("{}\n", serialize_proposal(&proposal));
    }
    Ok(())
}
