#include "rpo/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    using namespace rpo;
    CLI::App cli{"Riemannian preconditioned optimization experiments"};
    cli.require_subcommand(1);

    app::Options opt;
    std::uint64_t seed = 0;
    std::string out;
    int repeat = 0;
    std::string gen_app;
    std::vector<std::string> reports;

    auto common = [&](CLI::App* sub, bool runner) {
        sub->add_option("--config", opt.config_path, "INI configuration file")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "seed override");
        sub->add_option("--out", out, "output directory");
        if (runner) {
            sub->add_flag("--with-spectrum", opt.with_spectrum, "record condition numbers in the summary");
            sub->add_option("--repeat", repeat, "number of seeded repetitions")->check(CLI::PositiveNumber);
        }
    };
    for (const auto& name : app::applications()) common(cli.add_subcommand(name, "run the " + name + " experiment"), true);
    auto* gen = cli.add_subcommand("generate", "write seeded synthetic inputs");
    common(gen, false);
    gen->add_option("--app", gen_app, "application (defaults to [run].application)");
    auto* cmp = cli.add_subcommand("compare", "tabulate run summaries");
    cmp->add_option("reports", reports, "summary JSON files")->required();
    cmp->add_option("--out", out, "directory for compare.csv");

    CLI11_PARSE(cli, argc, argv);

    auto* sub = cli.get_subcommands().front();
    auto given = [&](const std::string& flag) {
        const CLI::Option* o = sub->get_option_no_throw(flag);
        return o && o->count() > 0;
    };
    if (given("--seed")) opt.seed = seed;
    if (!out.empty()) opt.out = out;
    if (given("--repeat")) opt.repeat = repeat;

    try {
        const std::string name = sub->get_name();
        if (name == "generate") {
            for (const auto& p : app::generate(opt, gen_app)) std::cout << p.string() << '\n';
            return 0;
        }
        if (name == "compare") {
            std::vector<std::filesystem::path> paths(reports.begin(), reports.end());
            const app::Table t = app::compare(paths);
            if (opt.out) {
                auto f = io::open_out(*opt.out / "compare.csv");
                f << t.csv();
            }
            std::cout << t.text();
            return 0;
        }
        return app::run(name, opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
