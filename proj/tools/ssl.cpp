// ssl: experiment runner for the contrastive loss family.

#include "contrastive/commands.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
    using namespace contrastive;

    CLI::App app{"Self-supervised contrastive training with bi-projector Jaccard losses"};
    app.require_subcommand(1);

    std::string config_path;
    std::string resume_path;
    auto* train = app.add_subcommand("train", "train one experiment from a JSON config");
    train->add_option("--config", config_path, "experiment config (JSON)")->required();
    train->add_option("--resume", resume_path, "checkpoint to continue from");
    ConfigOverrides overrides;
    train->add_flag("--strict-eq4", overrides.mixed_head_negatives, "use mixed-head negatives in the second InfoNCE term");

    std::string config_a;
    std::string config_b;
    std::string compare_out;
    auto* compare = app.add_subcommand("compare", "train two configs on the same data and tabulate accuracies");
    compare->add_option("--config-a", config_a, "first config")->required();
    compare->add_option("--config-b", config_b, "second config")->required();
    compare->add_option("--out", compare_out, "CSV output path")->required();
    compare->add_flag("--strict-eq4", overrides.mixed_head_negatives, "use mixed-head negatives in the second InfoNCE term");

    VerifyOptions verify_opts;
    auto* verify = app.add_subcommand("verify", "run the numerical property suites");
    verify->add_option("--instances", verify_opts.instances, "instances for score-level properties")
        ->check(CLI::PositiveNumber);
    verify->add_option("--seed", verify_opts.seed, "property RNG seed");

    std::string checkpoint;
    std::string dataset;
    std::string embed_out;
    auto* embed = app.add_subcommand("embed", "export embeddings of a dataset under a trained checkpoint");
    embed->add_option("--checkpoint", checkpoint, "checkpoint JSON")->required();
    embed->add_option("--dataset", dataset, "CSV path, dataset JSON file, or inline dataset JSON")->required();
    embed->add_option("--out", embed_out, "CSV output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (*train) {
        std::optional<std::filesystem::path> resume;
        if (!resume_path.empty()) resume = resume_path;
        return cmd_train(config_path, resume, overrides, std::cout, std::cerr);
    }
    if (*compare) return cmd_compare(config_a, config_b, compare_out, overrides, std::cout, std::cerr);
    if (*verify) return cmd_verify(verify_opts, std::cout, std::cerr);
    return cmd_embed(checkpoint, dataset, embed_out, std::cout, std::cerr);
}
