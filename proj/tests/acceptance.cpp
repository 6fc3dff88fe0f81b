// Acceptance suite: one PASS/FAIL line per criterion, exit 0 iff all pass.
// All tolerances are pinned here.

#include <chrono>
#include <cstdio>
#include <map>

#include "declgrad/gradcheck.hpp"
#include "declgrad/results.hpp"
#include "declgrad/verify.hpp"

using namespace declgrad;

namespace {

constexpr std::uint64_t kSeed = 1;

bool g_all_pass = true;

void report(int criterion, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
    std::printf("[%2d] %-28s %s  (%.1fs)  %s\n", criterion, name.c_str(),
                pass ? "PASS" : "FAIL", seconds, detail.c_str());
    std::fflush(stdout);
    if (!pass) g_all_pass = false;
}

template <typename F>
void timed(int criterion, const std::string& name, F&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    bool pass = false;
    std::string detail;
    try {
        std::tie(pass, detail) = fn();
    } catch (const std::exception& e) {
        pass = false;
        detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(criterion, name, pass, detail, secs);
}

std::pair<bool, std::string> from_checks(std::vector<verify::CheckResult> checks) {
    bool pass = true;
    std::string detail;
    for (const auto& c : checks) {
        pass = pass && c.pass;
        if (!detail.empty()) detail += "; ";
        detail += c.detail;
    }
    return {pass, detail};
}

// --- criterion 7: gradient oracles -----------------------------------------

std::pair<bool, std::string> check_gradient_oracles() {
    Rng rng(kSeed, 100);
    double sphere_worst = 0.0;
    for (std::size_t t = 0; t < 10; ++t) {
        Rng sub = rng.substream(t);
        Vector x = sample_gaussian(sub, 10);
        Vector v = sample_gaussian(sub, 10);
        sphere_worst = std::max(sphere_worst, gradcheck::check_sphere(x, v));
    }

    Rng org(kSeed, 101);
    double ot_worst = 0.0, tangency_worst = 0.0;
    Vector r(4, 0.25), c(4, 0.25);
    for (std::size_t t = 0; t < 3; ++t) {
        Rng sub = org.substream(t);
        Matrix M(4, 4), v(4, 4);
        for (std::size_t i = 0; i < 16; ++i) {
            M.data()[i] = sub.gaussian();
            v.data()[i] = sub.gaussian();
        }
        ot_worst = std::max(ot_worst, gradcheck::check_ot(M, v, r, c, 1.0));
        auto plan = nodes::sinkhorn_forward(M, r, c, 1.0, 1e-10, 20000);
        tangency_worst = std::max(tangency_worst, gradcheck::ot_tangency_residual(plan));
    }

    Rng erg(kSeed, 102);
    double eigen_worst = 0.0;
    for (std::size_t t = 0; t < 10; ++t) {
        Rng sub = erg.substream(t);
        Matrix X = random_symmetric(sub, 5);
        Vector v = sample_gaussian(sub, 5);
        eigen_worst = std::max(eigen_worst, gradcheck::check_eigen(X, 4, v));
    }

    bool pass = sphere_worst <= 1e-5 && ot_worst <= 1e-5 && eigen_worst <= 1e-4 &&
                tangency_worst <= 1e-8;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "sphere rel err=%.2e (<=1e-5), ot rel err=%.2e (<=1e-5), eigen rel err=%.2e "
                  "(<=1e-4), tangency=%.2e (<=1e-8)",
                  sphere_worst, ot_worst, eigen_worst, tangency_worst);
    return {pass, buf};
}

// --- experiment helpers ------------------------------------------------------

struct RunStats {
    std::map<std::size_t, double> first_loss, loss_at_100, last_loss;
    std::map<std::size_t, double> cos_sum;
    std::map<std::size_t, std::size_t> count, positive;
    bool descent_always_one = true;
    bool cos_always_positive = true;

    void add(const train::CurveRecord& r) {
        if (r.iteration == 0) first_loss[r.run] = r.loss;
        if (r.iteration == 100) loss_at_100[r.run] = r.loss;
        last_loss[r.run] = r.loss;
        cos_sum[r.run] += r.cos_sim_mean;
        ++count[r.run];
        if (r.cos_sim_mean > 0.0) ++positive[r.run];
        if (r.descent_fraction != 1.0) descent_always_one = false;
        if (r.cos_sim_mean <= 0.0) cos_always_positive = false;
    }

    double run_mean(std::size_t run) const {
        return cos_sum.at(run) / static_cast<double>(count.at(run));
    }
};

RunStats run_and_collect(train::ExperimentConfig cfg) {
    RunStats stats;
    for (const auto& r : train::run_experiment(cfg).records) stats.add(r);
    return stats;
}

train::ExperimentConfig base_config() {
    train::ExperimentConfig cfg;
    cfg.seed = kSeed;
    return cfg;
}

std::pair<bool, std::string> check_sphere_experiment() {
    bool pass = true;
    std::string detail;
    for (std::size_t d : {std::size_t{5}, std::size_t{100}}) {
        train::ExperimentConfig cfg = base_config();
        cfg.problem = train::Problem::sphere;
        cfg.d = d;
        cfg.m = 10;
        cfg.grad_mode = train::GradMode::approx;
        RunStats stats = run_and_collect(cfg);
        bool improved = true;
        for (const auto& [run, l0] : stats.first_loss)
            if (!(stats.loss_at_100.at(run) < l0)) improved = false;
        pass = pass && stats.descent_always_one && improved;
        detail += "d=" + std::to_string(d) +
                  ": descent_fraction==1 " + (stats.descent_always_one ? "yes" : "NO") +
                  ", loss@100<loss@0 in all runs " + (improved ? "yes" : "NO") + "; ";
    }
    return {pass, detail};
}

std::pair<bool, std::string> check_ot_experiment() {
    train::ExperimentConfig cfg = base_config();
    cfg.problem = train::Problem::ot;
    cfg.m = cfg.n = 10;
    cfg.gamma = 1.0;
    cfg.grad_mode = train::GradMode::approx;
    RunStats approx = run_and_collect(cfg);

    cfg.grad_mode = train::GradMode::exact;
    RunStats exact = run_and_collect(cfg);
    bool exact_improves = true;
    for (const auto& [run, l0] : exact.first_loss)
        if (!(exact.last_loss.at(run) < l0)) exact_improves = false;

    bool pass = approx.cos_always_positive && exact_improves;
    std::string detail = std::string("approx cos_sim_mean>0 at every iteration ") +
                         (approx.cos_always_positive ? "yes" : "NO") +
                         ", exact final<initial loss in all runs " +
                         (exact_improves ? "yes" : "NO");
    return {pass, detail};
}

std::pair<bool, std::string> check_eigen_experiment() {
    train::ExperimentConfig cfg = base_config();
    cfg.problem = train::Problem::eigen;
    cfg.grad_mode = train::GradMode::approx;

    cfg.eigen_setting = train::EigenSetting::largest_negdef;
    RunStats negdef = run_and_collect(cfg);
    cfg.eigen_setting = train::EigenSetting::largest;
    RunStats general = run_and_collect(cfg);

    bool negdef_positive = true;
    double negdef_min_mean = 1.0, general_max_mean = -1.0;
    double general_max_fraction = 0.0;
    for (const auto& [run, n] : negdef.count) {
        double mean = negdef.run_mean(run);
        negdef_min_mean = std::min(negdef_min_mean, mean);
        if (!(mean > 0.0)) negdef_positive = false;
        (void)n;
    }
    for (const auto& [run, n] : general.count) {
        general_max_mean = std::max(general_max_mean, general.run_mean(run));
        auto it = general.positive.find(run);
        double pos = it == general.positive.end() ? 0.0 : static_cast<double>(it->second);
        general_max_fraction = std::max(general_max_fraction, pos / static_cast<double>(n));
    }
    bool ordered = general_max_mean < negdef_min_mean;
    bool rare = general_max_fraction < 0.5;

    bool pass = negdef_positive && ordered && rare;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "negdef per-run mean cos >= %.3f (>0), general per-run mean cos <= %.3f "
                  "(< negdef), general positive fraction <= %.3f (<0.5)",
                  negdef_min_mean, general_max_mean, general_max_fraction);
    return {pass, buf};
}

std::pair<bool, std::string> check_determinism() {
    train::ExperimentConfig cfg = base_config();
    cfg.problem = train::Problem::sphere;
    cfg.d = 5;
    cfg.m = 8;
    cfg.iterations = 50;
    cfg.repeats = 2;
    auto a = train::run_experiment(cfg);
    auto b = train::run_experiment(cfg);
    std::string csv_a = results::to_csv(a.records, cfg);
    std::string csv_b = results::to_csv(b.records, cfg);
    bool csv_ok = csv_a == csv_b;

    std::istringstream in_a(csv_a);
    auto rows = results::parse_results_csv(in_a);
    std::string svg_a = results::render_curves_svg({rows});
    std::string svg_b = results::render_curves_svg({rows});
    bool svg_ok = svg_a == svg_b;

    return {csv_ok && svg_ok, std::string("csv byte-identical ") + (csv_ok ? "yes" : "NO") +
                                  ", svg byte-identical " + (svg_ok ? "yes" : "NO")};
}

std::pair<bool, std::string> check_end_to_end_gradients() {
    bool pass = true;
    std::string detail;
    for (train::Problem problem :
         {train::Problem::sphere, train::Problem::ot, train::Problem::eigen}) {
        train::ExperimentConfig cfg = base_config();
        cfg.problem = problem;
        cfg.eigen_setting = train::EigenSetting::largest;
        cfg.d = 3;
        cfg.m = 4;
        cfg.n = 4;
        cfg.batch = 2;
        cfg.hidden1 = cfg.hidden2 = 6;
        cfg.sinkhorn_tol = 1e-11;
        train::Pipeline pipeline(cfg);
        Rng rng(cfg.seed);
        auto batch = pipeline.make_batch(rng.substream(0));
        train::Mlp mlp =
            train::mlp_init(cfg.d, cfg.hidden1, cfg.hidden2, pipeline.raw_dim(), rng.substream(1));
        auto eval = pipeline.evaluate(mlp, batch, train::GradMode::exact, false);

        std::vector<double*> ptrs;
        std::vector<double> analytic;
        auto collect = [&](Matrix& W, const Matrix& G) {
            for (std::size_t i = 0; i < W.size(); ++i) {
                ptrs.push_back(W.data() + i);
                analytic.push_back(G.data()[i]);
            }
        };
        auto collect_v = [&](Vector& b, const Vector& g) {
            for (std::size_t i = 0; i < b.dim(); ++i) {
                ptrs.push_back(&b[i]);
                analytic.push_back(g[i]);
            }
        };
        collect(mlp.W1, eval.grads.W1);
        collect_v(mlp.b1, eval.grads.b1);
        collect(mlp.W2, eval.grads.W2);
        collect_v(mlp.b2, eval.grads.b2);
        collect(mlp.W3, eval.grads.W3);
        collect_v(mlp.b3, eval.grads.b3);

        double worst = 0.0, scale = 0.0;
        for (std::size_t k = 0; k < ptrs.size(); ++k) {
            double save = *ptrs[k];
            double h = 1e-5 * std::max(1.0, std::abs(save));
            *ptrs[k] = save + h;
            double fp = pipeline.loss_only(mlp, batch);
            *ptrs[k] = save - h;
            double fm = pipeline.loss_only(mlp, batch);
            *ptrs[k] = save;
            worst = std::max(worst, std::abs((fp - fm) / (2.0 * h) - analytic[k]));
            scale = std::max(scale, std::abs(analytic[k]));
        }
        double rel = worst / std::max(scale, 1e-12);
        if (rel > 1e-4) pass = false;
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%s rel err=%.2e; ", train::to_string(problem), rel);
        detail += buf;
    }
    return {pass, detail + "(<=1e-4 each)"};
}

}  // namespace

int main() {
    timed(1, "linear_expectation_m10", [] {
        return from_checks({verify::check_prop3(20, 1000000, 10, kSeed)});
    });
    timed(2, "linear_expectation_multi_p", [] {
        return from_checks({verify::check_prop4(5, 1000000, 10, kSeed)});
    });
    timed(3, "descent_max_bounds", [] {
        return from_checks(
            {verify::check_prop2_bounds(1000, 10, kSeed), verify::check_prop2_identity(10, kSeed)});
    });
    timed(4, "rank2_lemmas", [] {
        return from_checks(
            {verify::check_lemma_rank2(200, 8, kSeed), verify::check_lemma_spectrum(200, 8, kSeed)});
    });
    timed(5, "norm_expectation", [] {
        return from_checks({verify::check_prop5(50, 200000, 8, kSeed)});
    });
    timed(6, "norm_sign_cases", [] { return from_checks({verify::check_prop6(100, 8, kSeed)}); });
    timed(7, "gradient_oracles", check_gradient_oracles);
    timed(8, "sphere_experiment", check_sphere_experiment);
    timed(9, "ot_experiment", check_ot_experiment);
    timed(10, "eigen_experiment", check_eigen_experiment);
    timed(11, "determinism", check_determinism);
    timed(12, "end_to_end_gradcheck", check_end_to_end_gradients);

    std::printf("%s\n", g_all_pass ? "ALL PASS" : "FAILURES PRESENT");
    return g_all_pass ? 0 : 1;
}
