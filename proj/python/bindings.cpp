#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "netreg/commands.hpp"

namespace py = pybind11;
using namespace netreg;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor3 tensor_from(const Array& a) {
    if (a.ndim() != 3) throw std::invalid_argument("expected a 3-d array");
    Tensor3 t(std::size_t(a.shape(0)), std::size_t(a.shape(1)), std::size_t(a.shape(2)));
    auto r = a.unchecked<3>();
    for (py::ssize_t i = 0; i < r.shape(0); ++i)
        for (py::ssize_t j = 0; j < r.shape(1); ++j)
            for (py::ssize_t k = 0; k < r.shape(2); ++k) t(i, j, k) = r(i, j, k);
    return t;
}

Array tensor_to(const Tensor3& t) {
    Array a({py::ssize_t(t.d1()), py::ssize_t(t.d2()), py::ssize_t(t.d3())});
    auto w = a.mutable_unchecked<3>();
    for (std::size_t i = 0; i < t.d1(); ++i)
        for (std::size_t j = 0; j < t.d2(); ++j)
            for (std::size_t k = 0; k < t.d3(); ++k) w(i, j, k) = t(i, j, k);
    return a;
}

// (N, n, n) stack of networks.
Array networks_to(const NetworkDataset& d) {
    Array a({py::ssize_t(d.subjects()), py::ssize_t(d.n), py::ssize_t(d.n)});
    auto w = a.mutable_unchecked<3>();
    for (std::size_t s = 0; s < d.subjects(); ++s) {
        const auto m = d.adjacency(s);
        for (std::size_t i = 0; i < d.n; ++i)
            for (std::size_t j = 0; j < d.n; ++j) w(s, i, j) = m(i, j);
    }
    return a;
}

NetworkDataset dataset_from(const Array& networks, const Matrix& covariates, const std::string& family, bool symmetric) {
    if (networks.ndim() != 3 || networks.shape(1) != networks.shape(2)) {
        throw std::invalid_argument("networks must have shape (N, n, n)");
    }
    const auto n = networks.shape(1);
    auto r = networks.unchecked<3>();
    std::vector<Matrix> list;
    for (py::ssize_t s = 0; s < networks.shape(0); ++s) {
        Matrix m(n, n);
        for (py::ssize_t i = 0; i < n; ++i)
            for (py::ssize_t j = 0; j < n; ++j) m(i, j) = r(s, i, j);
        list.push_back(std::move(m));
    }
    auto d = NetworkDataset::from_networks(list, covariates, parse_family(family), symmetric);
    d.validate();
    return d;
}

py::dict fit_to_dict(const FitResult& f, const NetworkDataset& d) {
    py::dict out;
    out["theta"] = f.theta();
    out["b"] = tensor_to(f.b);
    out["u"] = f.factors.u;
    if (f.factors.mode == FactorMode::symmetric) out["lambda"] = f.factors.lambda;
    else out["v"] = f.factors.v;
    out["rank"] = f.hyper.rank;
    out["sparsity"] = f.hyper.sparsity;
    out["step_delta"] = f.hyper.step_delta;
    out["step_tau"] = f.hyper.step_tau;
    out["objective_trace"] = f.objective_trace;
    out["iterations"] = f.iterations;
    out["converged"] = f.converged;
    out["warmup_iterations"] = f.warmup_iterations;
    out["loss"] = neg_loglik(d, f.theta(), f.b);
    out["ebic"] = ebic(f, d);
    return out;
}

Hyperparams make_hyper(std::size_t rank, std::size_t sparsity, double step_delta, double step_tau, std::size_t max_iter,
                       double tol) {
    Hyperparams h;
    h.rank = rank;
    h.sparsity = sparsity;
    h.step_delta = step_delta;
    h.step_tau = step_tau;
    h.max_iter = max_iter;
    h.tol = tol;
    return h;
}

}  // namespace

PYBIND11_MODULE(_netreg, m) {
    m.doc() = "Low-rank plus sparse regression for populations of networks";

    py::register_exception<DivergedFit>(m, "DivergedFit", PyExc_RuntimeError);
    py::register_exception<IngestionError>(m, "IngestionError", PyExc_IOError);

    m.def("simulate", [](const std::string& protocol, std::size_t n, std::size_t p, std::size_t subjects,
                         std::size_t rank, double s0, double signal, double w, std::size_t k, std::uint64_t seed) {
        SimConfig cfg;
        cfg.protocol = parse_protocol(protocol);
        cfg.n = n;
        cfg.p = p;
        cfg.subjects = subjects;
        cfg.rank = rank;
        cfg.s0 = s0;
        cfg.signal = signal;
        cfg.w = w;
        cfg.k = k;
        cfg.seed = seed;
        const auto sim = simulate(cfg);
        py::dict out;
        out["networks"] = networks_to(sim.data);
        out["covariates"] = sim.data.covariates;
        out["family"] = to_string(sim.data.family);
        out["symmetric"] = sim.data.symmetric;
        out["theta_star"] = sim.truth.theta_star;
        out["b_star"] = tensor_to(sim.truth.b_star);
        out["communities"] = sim.truth.communities;
        out["rank"] = sim.truth.rank;
        out["sigma1"] = sim.truth.sigma1;
        return out;
    }, py::arg("protocol") = "glsnet", py::arg("n") = 50, py::arg("p") = 10, py::arg("N") = 200,
       py::arg("rank") = 2, py::arg("s0") = 0.1, py::arg("signal") = 2.0, py::arg("w") = 0.5, py::arg("K") = 3,
       py::arg("seed") = 1);

    m.def("fit", [](const Array& networks, const Matrix& covariates, const std::string& family, bool symmetric,
                    std::size_t rank, double sparsity_frac, double step_delta, double step_tau, std::size_t max_iter,
                    double tol) {
        const auto d = dataset_from(networks, covariates, family, symmetric);
        const auto s = sparsity_budget(sparsity_frac, d.n, d.covariate_count(), d.symmetric);
        FitResult f;
        {
            py::gil_scoped_release release;
            f = fit(d, make_hyper(rank, s, step_delta, step_tau, max_iter, tol));
        }
        return fit_to_dict(f, d);
    }, py::arg("networks"), py::arg("covariates"), py::arg("family") = "bernoulli", py::arg("symmetric") = true,
       py::arg("rank") = 1, py::arg("sparsity_frac") = 0.0, py::arg("step_delta") = 0.0, py::arg("step_tau") = 0.0,
       py::arg("max_iter") = 200, py::arg("tol") = 1e-3,
       "Fits the model at a fixed rank and sparsity fraction. Step sizes <= 0 select the defaults.");

    m.def("tune", [](const Array& networks, const Matrix& covariates, const std::string& family, bool symmetric,
                     std::vector<std::size_t> ranks, std::vector<double> fracs, std::size_t max_iter, double tol) {
        const auto d = dataset_from(networks, covariates, family, symmetric);
        TuneResult t;
        {
            py::gil_scoped_release release;
            t = tune(d, ranks, fracs, make_hyper(1, 0, 0.0, 0.0, max_iter, tol));
        }
        py::dict out = fit_to_dict(t.best, d);
        py::list grid;
        for (const auto& c : t.grid) {
            py::dict cell;
            cell["rank"] = c.rank;
            cell["sparsity_frac"] = c.sparsity_frac;
            cell["sparsity"] = c.sparsity;
            cell["loss"] = c.loss;
            cell["ebic"] = c.ebic;
            cell["failed"] = c.failed;
            cell["error"] = c.error;
            grid.append(cell);
        }
        out["grid"] = grid;
        out["best_index"] = t.best_index;
        return out;
    }, py::arg("networks"), py::arg("covariates"), py::arg("family") = "bernoulli", py::arg("symmetric") = true,
       py::arg("ranks") = std::vector<std::size_t>{1, 2, 3}, py::arg("sparsity_fracs") = std::vector<double>{0.0},
       py::arg("max_iter") = 200, py::arg("tol") = 1e-3);

    m.def("neg_loglik", [](const Array& networks, const Matrix& covariates, const std::string& family, bool symmetric,
                           const Matrix& theta, const Array& b) {
        return neg_loglik(dataset_from(networks, covariates, family, symmetric), theta, tensor_from(b));
    }, py::arg("networks"), py::arg("covariates"), py::arg("family"), py::arg("symmetric"), py::arg("theta"),
       py::arg("b"));

    m.def("truncate", [](const Array& b, std::size_t s) { return tensor_to(truncate(tensor_from(b), s)); },
          py::arg("b"), py::arg("s"));
    m.def("ebic_value", &ebic_value, py::arg("loss"), py::arg("n"), py::arg("N"), py::arg("p"), py::arg("rank"),
          py::arg("sparsity"));
    m.def("sparsity_budget", &sparsity_budget, py::arg("fraction"), py::arg("n"), py::arg("p"), py::arg("symmetric"));

    m.def("detect_communities", [](const Matrix& u, std::size_t k, std::size_t restarts, std::uint64_t seed) {
        const auto c = detect_communities(u, k, restarts, seed);
        return py::make_tuple(c.labels, c.centers, c.inertia);
    }, py::arg("u"), py::arg("k"), py::arg("restarts") = kDefaultKmeansRestarts, py::arg("seed") = 0);
    m.def("nmi", &nmi, py::arg("a"), py::arg("b"));
    m.def("f1_support", [](const Array& est, const Array& truth, bool upper_only) {
        return f1_support(select_edges(tensor_from(est), upper_only), select_edges(tensor_from(truth), upper_only));
    }, py::arg("estimate"), py::arg("truth"), py::arg("upper_only") = true);

    m.def("load_dataset", [](const std::filesystem::path& manifest) {
        const auto loaded = load_dataset(manifest);
        py::dict out;
        out["networks"] = networks_to(loaded.data);
        out["covariates"] = loaded.data.covariates;
        out["covariate_names"] = loaded.manifest.covariate_names;
        out["family"] = to_string(loaded.data.family);
        out["symmetric"] = loaded.data.symmetric;
        return out;
    }, py::arg("manifest"));
}
