use sara_bench::{random_matrix, random_prefs, scenario};

#[test]
fn inputs_are_well_formed() {
    let m = random_matrix(6, 0);
    assert_eq!(m.len(), 6);
    assert!(m.iter().all(|r| r.len() == 6));
    assert_eq!(m, random_matrix(6, 0));

    let (prefs, scores) = random_prefs(5, 4, 0);
    for p in &prefs {
        let mut sorted = p.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
    }
    assert_eq!(scores.len(), 4);

    let inst = scenario(10, 1);
    assert_eq!(inst.game.n_users(), 14);
    assert_eq!(inst.game.sues().len(), 4);
}
