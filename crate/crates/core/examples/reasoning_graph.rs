//! Builds the reasoning graph for the umbrella example, votes, and prints
//! the explanation and the Graphviz export.

use abductive_vqa::backends::ScriptedNli;
use abductive_vqa::domain::{
    AbductionProposal, AnswerCandidate, AnswerSource, ClueOrigin, DependencyEdge, EdgeTarget, VisualClue,
};
use abductive_vqa::reasoner::{build_graph, explain, fulfill_proposals, to_dot, vote, FulfillmentConfig};

fn proposal(id: &str, answer: &str, conditions: &[(&str, &str)], edges: &[(&str, &str)]) -> AbductionProposal {
    let conditions = conditions.iter().map(|(i, s)| (i.to_string(), s.to_string())).collect();
    let edges = edges.iter().map(|(f, t)| DependencyEdge::new(*f, EdgeTarget::from(*t))).collect();
    AbductionProposal::new(id, AnswerCandidate::new(answer, AnswerSource::DatasetChoice).unwrap(), conditions, edges)
        .unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let clues: Vec<VisualClue> = ["a man holds an open umbrella", "the street is wet", "the sky is grey"]
        .iter()
        .enumerate()
        .map(|(i, s)| VisualClue::new(i, *s, ClueOrigin::Gold))
        .collect();
    let proposals = vec![
        proposal(
            "p0",
            "yes",
            &[("C1", "people are using umbrellas"), ("C2", "the ground is wet"), ("C3", "it rained recently")],
            &[("C1", "__ANSWER__"), ("C2", "C3"), ("C3", "__ANSWER__")],
        ),
        proposal("p1", "no", &[("C1", "the weather is dry")], &[("C1", "__ANSWER__")]),
    ];
    let nli = ScriptedNli::strict("demo")
        .with_entail("a man holds an open umbrella", "people are using umbrellas", 0.93)
        .with_entail("the street is wet", "the ground is wet", 0.9)
        .with_entail("the ground is wet", "it rained recently", 0.65);

    let fulfillments = fulfill_proposals(&clues, &proposals, &FulfillmentConfig::default(), &nli)?;
    let graph = build_graph(&clues, &proposals, &fulfillments)?;
    let prediction = vote(&graph)?;
    println!("{}\n", explain(&prediction));
    print!("{}", to_dot(&graph));
    Ok(())
}
