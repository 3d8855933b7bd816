mod common;

#[test]
fn segmenter_is_reached_only_through_the_oracle_contract() {
    let problems = common::audit_segmenter_boundary();
    assert!(problems.is_empty(), "{problems:#?}");
}
