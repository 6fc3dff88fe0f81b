#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "declgrad/gradcheck.hpp"
#include "declgrad/results.hpp"
#include "declgrad/train.hpp"
#include "declgrad/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace declgrad;

namespace {

struct Options {
    std::uint64_t seed = 0;
    std::size_t samples = 1000000;
    std::string problem = "sphere";
    std::string setting = "largest";
    std::size_t d = 5;
    std::size_t m = 10;
    double gamma = 1.0;
    std::string mode = "both";
    std::size_t iters = 500;
    std::size_t repeats = 5;
    std::string out = ".";
    std::string filter;
    bool log_loss = false;
    std::vector<std::string> inputs;
    bool problem_from_config = false;
};

// DECLGRAD_SEED is the lowest-precedence seed source; a config file and then
// explicit flags override it.
void apply_env_seed(Options& opt) {
    if (const char* env = std::getenv("DECLGRAD_SEED")) {
        try {
            opt.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw CLI::ValidationError("DECLGRAD_SEED is not an integer: " + std::string(env));
        }
    }
}

void apply_config_file(Options& opt, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CLI::ValidationError("cannot open config file: " + path);
    json cfg = json::parse(in);
    if (!cfg.is_object()) throw CLI::ValidationError("config file must hold a JSON object");
    for (auto& [key, value] : cfg.items()) {
        if (key == "seed") opt.seed = value.get<std::uint64_t>();
        else if (key == "samples") opt.samples = value.get<std::size_t>();
        else if (key == "problem") {
            opt.problem = value.get<std::string>();
            opt.problem_from_config = true;
        }
        else if (key == "setting") opt.setting = value.get<std::string>();
        else if (key == "d") opt.d = value.get<std::size_t>();
        else if (key == "m") opt.m = value.get<std::size_t>();
        else if (key == "gamma") opt.gamma = value.get<double>();
        else if (key == "mode") opt.mode = value.get<std::string>();
        else if (key == "iters") opt.iters = value.get<std::size_t>();
        else if (key == "repeats") opt.repeats = value.get<std::size_t>();
        else if (key == "out") opt.out = value.get<std::string>();
        else if (key == "filter") opt.filter = value.get<std::string>();
        else if (key == "log-loss") opt.log_loss = value.get<bool>();
        else throw CLI::ValidationError("unknown config key: " + key);
    }
}

train::Problem parse_problem(const std::string& s) {
    if (s == "sphere") return train::Problem::sphere;
    if (s == "ot") return train::Problem::ot;
    if (s == "eigen") return train::Problem::eigen;
    throw CLI::ValidationError("unknown problem: " + s);
}

train::EigenSetting parse_setting(const std::string& s) {
    if (s == "all") return train::EigenSetting::all;
    if (s == "largest") return train::EigenSetting::largest;
    if (s == "largest_negdef") return train::EigenSetting::largest_negdef;
    if (s == "largest_rank2") return train::EigenSetting::largest_rank2;
    throw CLI::ValidationError("unknown eigen setting: " + s);
}

train::ExperimentConfig to_experiment_config(const Options& opt, train::GradMode mode) {
    train::ExperimentConfig cfg;
    cfg.problem = parse_problem(opt.problem);
    cfg.eigen_setting = parse_setting(opt.setting);
    cfg.d = opt.d;
    cfg.m = opt.m;
    cfg.n = opt.m;
    cfg.iterations = opt.iters;
    cfg.repeats = opt.repeats;
    cfg.seed = opt.seed;
    cfg.grad_mode = mode;
    cfg.gamma = opt.gamma;
    return cfg;
}

void echo_config(const Options& opt, const std::string& subcommand) {
    json j{{"subcommand", subcommand}, {"seed", opt.seed},     {"samples", opt.samples},
           {"problem", opt.problem},   {"setting", opt.setting}, {"d", opt.d},
           {"m", opt.m},               {"gamma", opt.gamma},     {"mode", opt.mode},
           {"iters", opt.iters},       {"repeats", opt.repeats}, {"out", opt.out},
           {"filter", opt.filter},     {"log-loss", opt.log_loss}};
    std::cout << "config: " << j.dump() << "\n";
}

int cmd_verify(const Options& opt) {
    echo_config(opt, "verify");
    auto checks = verify::run_all(opt.samples, opt.seed, opt.filter);
    if (checks.empty()) {
        std::cerr << "no checks match filter '" << opt.filter << "'\n";
        return 2;
    }
    bool all_pass = true;
    for (const auto& c : checks) {
        std::cout << c.name << ": " << c.detail << ", " << (c.pass ? "PASS" : "FAIL") << "\n";
        all_pass = all_pass && c.pass;
    }
    return all_pass ? 0 : 1;
}

int cmd_gradcheck(const Options& opt) {
    echo_config(opt, "gradcheck");
    Rng rng(opt.seed, 20);
    bool all_pass = true;

    auto report = [&](const std::string& name, double err, double tol) {
        bool pass = err <= tol;
        std::cout << name << ": max rel err = " << results::fmt_real(err) << " (tol "
                  << results::fmt_real(tol) << "), " << (pass ? "PASS" : "FAIL") << "\n";
        all_pass = all_pass && pass;
    };

    if (opt.problem == "sphere" || opt.problem == "all") {
        double worst = 0.0;
        for (std::size_t t = 0; t < 5; ++t) {
            Rng sub = rng.substream(t);
            Vector x = sample_gaussian(sub, opt.m);
            Vector v = sample_gaussian(sub, opt.m);
            worst = std::max(worst, gradcheck::check_sphere(x, v));
        }
        report("sphere m=" + std::to_string(opt.m), worst, 1e-5);
    }
    if (opt.problem == "ot" || opt.problem == "all") {
        double worst = 0.0, worst_tan = 0.0;
        Vector r(4, 0.25), c(4, 0.25);
        for (std::size_t t = 0; t < 3; ++t) {
            Rng sub = rng.substream(100 + t);
            Matrix M(4, 4), v(4, 4);
            for (std::size_t i = 0; i < 16; ++i) {
                M.data()[i] = sub.gaussian();
                v.data()[i] = sub.gaussian();
            }
            worst = std::max(worst, gradcheck::check_ot(M, v, r, c, opt.gamma));
            auto plan = nodes::sinkhorn_forward(M, r, c, opt.gamma, 1e-10, 20000);
            worst_tan = std::max(worst_tan, gradcheck::ot_tangency_residual(plan));
        }
        report("ot 4x4", worst, 1e-5);
        report("ot tangency A.Dy", worst_tan, 1e-8);
    }
    if (opt.problem == "eigen" || opt.problem == "all") {
        double worst = 0.0;
        for (std::size_t t = 0; t < 5; ++t) {
            Rng sub = rng.substream(200 + t);
            Matrix X = random_symmetric(sub, 6);
            Vector v = sample_gaussian(sub, 6);
            try {
                worst = std::max(worst, gradcheck::check_eigen(X, 5, v));
            } catch (const DegeneracyError& e) {
                std::cout << "eigen: degenerate instance at substream " << (200 + t) << ": "
                          << e.what() << "\n";
                all_pass = false;
            }
        }
        report("eigen m=6 (sign-aligned)", worst, 1e-4);
    }
    return all_pass ? 0 : 1;
}

int cmd_train(const Options& opt) {
    echo_config(opt, "train");
    std::vector<train::GradMode> modes;
    if (opt.mode == "both")
        modes = {train::GradMode::exact, train::GradMode::approx};
    else if (opt.mode == "exact")
        modes = {train::GradMode::exact};
    else if (opt.mode == "approx")
        modes = {train::GradMode::approx};
    else
        throw CLI::ValidationError("unknown mode: " + opt.mode);

    fs::create_directories(opt.out);
    std::string stem = std::string(opt.problem) +
                       (opt.problem == "eigen" ? "_" + opt.setting : std::string()) + "_d" +
                       std::to_string(opt.d);

    for (auto mode : modes) {
        train::ExperimentConfig cfg = to_experiment_config(opt, mode);
        std::string path =
            (fs::path(opt.out) / ("declgrad_" + stem + "_" + train::to_string(mode) + ".csv"))
                .string();
        std::vector<train::CurveRecord> partial;
        try {
            auto result = train::run_experiment(
                cfg, [&](const train::CurveRecord& rec) { partial.push_back(rec); });
            results::write_file(path, results::to_csv(result.records, cfg));
        } catch (const std::exception& e) {
            results::write_file(path, results::to_csv(partial, cfg) + "# aborted\n");
            std::cerr << "train failed (" << train::to_string(mode) << "): " << e.what() << "\n"
                      << "partial results flushed to " << path << "\n";
            return 1;
        }

        // summary: final loss per run, mean descent fraction
        std::vector<double> final_loss(cfg.repeats, 0.0);
        double mean_descent = 0.0;
        std::size_t count = 0;
        for (const auto& rec : partial) {
            if (rec.iteration + 1 == cfg.iterations) final_loss[rec.run] = rec.loss;
            mean_descent += rec.descent_fraction;
            ++count;
        }
        mean_descent /= static_cast<double>(std::max<std::size_t>(count, 1));
        std::string label = opt.d <= 5 ? "under parameterized" : "over parameterized";
        std::cout << train::to_string(mode) << " (" << label << ", d=" << opt.d << "): wrote "
                  << path << "\n  final losses:";
        for (double l : final_loss) std::cout << ' ' << results::fmt_real(l);
        std::cout << "\n  mean descent_fraction: " << results::fmt_real(mean_descent) << "\n";
    }
    return 0;
}

int cmd_plot(const Options& opt) {
    echo_config(opt, "plot");
    if (opt.inputs.empty()) {
        std::cerr << "plot: at least one input CSV required\n";
        return 2;
    }
    std::vector<std::vector<results::ResultsRow>> files;
    for (const auto& path : opt.inputs) {
        try {
            files.push_back(results::read_results_csv(path));
        } catch (const std::exception& e) {
            std::cerr << "plot: " << path << ": " << e.what() << "\n";
            return 2;
        }
    }
    std::string out_path = opt.out == "." ? "curves.svg" : opt.out;
    results::write_file(out_path, results::render_curves_svg(files, opt.log_loss));
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    Options opt;
    try {
        apply_env_seed(opt);
        // the config file seeds defaults; flags parsed afterwards override it
        for (int i = 1; i + 1 < argc; ++i)
            if (std::string(argv[i]) == "--config") apply_config_file(opt, argv[i + 1]);
    } catch (const CLI::ValidationError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    CLI::App app{"deep declarative node gradient toolkit"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "flat JSON config file (flags override)");

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", opt.seed, "base RNG seed");
        sub->add_option("--config", config_path, "flat JSON config file (flags override)");
    };

    auto* verify_cmd = app.add_subcommand("verify", "closed-form and Monte-Carlo theory checks");
    add_common(verify_cmd);
    verify_cmd->add_option("--samples", opt.samples, "Monte-Carlo sample count");
    verify_cmd->add_option("--filter", opt.filter, "run only checks whose name contains this");

    auto* gradcheck_cmd =
        app.add_subcommand("gradcheck", "finite-difference checks of the exact backward passes");
    add_common(gradcheck_cmd);
    gradcheck_cmd->add_option("--problem", opt.problem, "sphere|ot|eigen|all (default all)");
    gradcheck_cmd->add_option("--m", opt.m, "sphere dimension");
    gradcheck_cmd->add_option("--gamma", opt.gamma, "OT regularization strength");

    auto* train_cmd = app.add_subcommand("train", "run a training experiment, write results CSVs");
    add_common(train_cmd);
    train_cmd->add_option("--problem", opt.problem, "sphere|ot|eigen");
    train_cmd->add_option("--setting", opt.setting, "all|largest|largest_negdef|largest_rank2");
    train_cmd->add_option("--d", opt.d, "raw input dimension");
    train_cmd->add_option("--m", opt.m, "node dimension");
    train_cmd->add_option("--gamma", opt.gamma, "OT regularization strength");
    train_cmd->add_option("--mode", opt.mode, "exact|approx|both");
    train_cmd->add_option("--iters", opt.iters, "optimizer iterations");
    train_cmd->add_option("--repeats", opt.repeats, "independent runs");
    train_cmd->add_option("--out", opt.out, "output directory");

    auto* plot_cmd = app.add_subcommand("plot", "render loss + cosine-similarity SVG from CSVs");
    add_common(plot_cmd);
    plot_cmd->add_option("inputs", opt.inputs, "results CSV files");
    plot_cmd->add_option("--out", opt.out, "output SVG path");
    plot_cmd->add_flag("--log-loss", opt.log_loss, "log10 scale on the loss panel");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (verify_cmd->parsed()) return cmd_verify(opt);
        if (gradcheck_cmd->parsed()) {
            if (gradcheck_cmd->count("--problem") == 0 && !opt.problem_from_config)
                opt.problem = "all";
            return cmd_gradcheck(opt);
        }
        if (train_cmd->parsed()) return cmd_train(opt);
        if (plot_cmd->parsed()) return cmd_plot(opt);
    } catch (const CLI::ValidationError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
