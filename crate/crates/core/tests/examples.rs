macro_rules! example_test {
    ($module:ident, $test:ident, $file:literal) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $test() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example_test!(affinity_graph, affinity_graph_runs, "affinity_graph.rs");
example_test!(baselines, baselines_run, "baselines.rs");
example_test!(clean_synthetic, clean_synthetic_runs, "clean_synthetic.rs");
example_test!(episodic_eval, episodic_eval_runs, "episodic_eval.rs");
example_test!(feature_store_io, feature_store_io_runs, "feature_store_io.rs");
example_test!(gcn_from_scratch, gcn_from_scratch_runs, "gcn_from_scratch.rs");
example_test!(label_propagation, label_propagation_runs, "label_propagation.rs");
example_test!(lambda_sweep, lambda_sweep_runs, "lambda_sweep.rs");
example_test!(prototypes_and_cosine, prototypes_and_cosine_runs, "prototypes_and_cosine.rs");
