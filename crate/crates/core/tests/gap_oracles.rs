mod common;

#[test]
fn closed_form_gaps_match_vertex_enumeration() {
    let (game, mdp, constrained) = common::gap_discrepancies(100, 17);
    assert!(game <= 1e-9, "game gap off by {game}");
    assert!(mdp <= 1e-9, "mdp gap off by {mdp}");
    assert!(constrained <= 1e-9, "constrained gap off by {constrained}");
}
