// ccvol: conformal volume intervals from segmentation probability maps.
//
//   ccvol featurize --in maps/ [--in maps_model2/ ...] [--manifest truth.csv] --out records.csv
//   ccvol calibrate --records cal.csv --alpha 0.15 --method clustered --k 3 --seed 0 --out model.json
//   ccvol predict   (--records test.csv | --maps dir/ ...) --model model.json --out intervals.csv
//   ccvol evaluate  --intervals intervals.csv --truth truth.csv --out-summary summary.json
//   ccvol simulate  --config demo.conf --out results/ [--seed N] [--set key=value ...]
//
// Exit codes: 0 success, 2 usage or validation error, 3 I/O error.

#include <exception>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "ccvol/error.hpp"
#include "commands.hpp"

namespace cli = ccvol::cli;

int main(int argc, char** argv) {
    CLI::App app{"Conformal volume prediction intervals from segmentation probability maps"};
    app.require_subcommand(1);

    cli::FeaturizeOptions feat;
    auto* featurize = app.add_subcommand("featurize", "Threshold and histogram probability maps into a record CSV");
    featurize->add_option("--in", feat.input_dirs, "Directory of .npy maps; repeat to average maps across directories")
        ->required();
    featurize->add_option("--manifest", feat.manifest, "CSV with id,true_volume_mm3 columns");
    featurize->add_option("--out", feat.out_csv, "Output record CSV")->required();

    cli::CalibrateOptions cal;
    auto* calibrate = app.add_subcommand("calibrate", "Fit a conformal calibration model from a record CSV");
    calibrate->add_option("--records", cal.records_csv, "Record CSV with true volumes")->required();
    calibrate->add_option("--alpha", cal.alpha, "Miscoverage level; target coverage is 1 - alpha")->required();
    calibrate->add_option("--method", cal.method, "conventional or clustered")->capture_default_str();
    calibrate->add_option("--k", cal.k, "Number of histogram clusters (clustered method)")->capture_default_str();
    calibrate->add_option("--seed", cal.seed, "Seed for cluster initialization")->capture_default_str();
    calibrate->add_option("--out", cal.out_model, "Output model JSON")->required();

    cli::PredictOptions pred;
    auto* predict = app.add_subcommand("predict", "Predict calibrated volume intervals");
    predict->add_option("--records", pred.records_csv, "Record CSV to predict on");
    predict->add_option("--maps", pred.map_dirs, "Directory of .npy maps; repeat to average");
    predict->add_option("--model", pred.model, "Model JSON from calibrate")->required();
    predict->add_option("--out", pred.out_csv, "Output interval CSV")->required();

    cli::EvaluateOptions eval;
    auto* evaluate = app.add_subcommand("evaluate", "Coverage and risk-category triage of predicted intervals");
    evaluate->add_option("--intervals", eval.intervals_csv, "Interval CSV from predict")->required();
    evaluate->add_option("--truth", eval.truth_csv, "CSV with id,true_volume_mm3 columns")->required();
    evaluate->add_option("--out-summary", eval.out_summary, "Summary JSON (a .txt twin is written alongside)")
        ->required();
    evaluate->add_option("--out-triage", eval.out_triage, "Per-record triage CSV (default: <summary>.triage.csv)");

    cli::SimulateOptions sim;
    auto* simulate = app.add_subcommand("simulate", "Generate synthetic maps or run a coverage experiment");
    simulate->add_option("--config", sim.config_file, "key = value config file")->required();
    simulate->add_option("--out", sim.out_dir, "Output directory")->required();
    simulate->add_option("--seed", sim.seed, "Overrides the config seed");
    simulate->add_option("--set", sim.overrides, "Override a config entry, key=value; repeatable");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return cli::kExitUsage;
    }

    try {
        if (*featurize) return cli::cmd_featurize(feat);
        if (*calibrate) return cli::cmd_calibrate(cal);
        if (*predict) return cli::cmd_predict(pred);
        if (*evaluate) return cli::cmd_evaluate(eval);
        if (*simulate) return cli::cmd_simulate(sim);
    } catch (const ccvol::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kExitUsage;
    } catch (const ccvol::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kExitIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kExitIo;
    }
    return cli::kExitUsage;
}
