#include "latomo/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "latomo/denoiser.hpp"
#include "latomo/error.hpp"
#include "latomo/io.hpp"
#include "latomo/metrics.hpp"
#include "latomo/parallel.hpp"
#include "latomo/projector.hpp"
#include "latomo/radon.hpp"
#include "latomo/sampler.hpp"
#include "latomo/simulator.hpp"
#include "latomo/uncertainty.hpp"

namespace latomo::cli {

namespace {

// Phantom extents are written height x width x depth, e.g. 128x128x40.
Dims parse_dims(const std::string& text) {
    int h = 0, w = 0, d = 0;
    char x1 = 0, x2 = 0;
    std::istringstream in(text);
    if (!(in >> h >> x1 >> w >> x2 >> d) || x1 != 'x' || x2 != 'x' || !in.eof()) {
        throw ValidationError("--dims expects HxWxD, got '" + text + "'");
    }
    Dims dims{d, h, w};
    dims.validate();
    return dims;
}

std::vector<std::string> split_command(const std::string& cmd) {
    std::istringstream in(cmd);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    if (out.empty()) throw ValidationError("external denoiser command is empty");
    return out;
}

int depth_of(const Metadata& meta, int flag) {
    if (flag > 0) return flag;
    auto it = meta.find("depth");
    if (it == meta.end()) {
        throw ValidationError("tilt file carries no depth; pass --depth");
    }
    try {
        const int d = std::stoi(it->second);
        if (d > 0) return d;
    } catch (const std::exception&) {
    }
    throw ValidationError("tilt file has invalid depth metadata '" + it->second + "'");
}

TiltSeries load_tilt_input(const std::string& path, Metadata& meta) {
    if (detect_file_kind(path) == FileKind::volume) {
        throw ValidationError("input " + path + " is a TDVOL1 volume; expected a TDTLT1 tilt series");
    }
    return load_tilts(path, &meta);
}

Volume load_volume_input(const std::string& path) {
    if (detect_file_kind(path) == FileKind::tilts) {
        throw ValidationError("input " + path + " is a TDTLT1 tilt series; expected a TDVOL1 volume");
    }
    return load_volume(path);
}

struct Options {
    std::uint64_t seed = 0;
    int threads = 1;
    bool quiet = false;

    // phantom / dataset
    std::string dims = "128x128x40";
    int min_shells = 2, max_shells = 3, min_blobs = 2, max_blobs = 6;
    int count = 8;
    std::string dir;

    // simulate
    double range = 10.0, step = 1.0, center = 0.0;
    bool random_acquisition = false;
    double contrast_c = 0.02, gamma = 0.8, k = 1.0, noise_sigma = 0.0;

    // reconstruct
    std::string method;
    std::string filter = "ramp";
    int iters = 50;
    double lambda = 0.0;
    int depth = 0;
    std::string denoiser;
    int steps = 50;
    double cfg_scale = 1.5;
    int proj_steps = 5;
    std::string schedule = "cosine";
    double sigma = 2.0;
    bool no_uncertainty = false;
    double timeout = 60.0;

    // evaluate
    std::string recon, reference;
    bool no_align = false;
    std::string manifest;

    // export
    int axis = 0;
    std::string prefix;
    std::string normalize = "global";

    std::string input, output;
};

void progress(const Options& o, int step, double residual) {
    if (o.quiet) return;
    std::fprintf(stderr, "step=%d residual=%.9g\n", step, residual);
}

ContrastParams contrast_of(const Options& o) {
    ContrastParams p{o.contrast_c, o.gamma, o.k, o.noise_sigma, o.seed};
    p.validate();
    return p;
}

PhantomSpec phantom_spec_of(const Options& o) {
    PhantomSpec ps;
    ps.dims = parse_dims(o.dims);
    ps.min_shells = o.min_shells;
    ps.max_shells = o.max_shells;
    ps.min_blobs = o.min_blobs;
    ps.max_blobs = o.max_blobs;
    ps.seed = o.seed;
    ps.validate();
    return ps;
}

int cmd_phantom(const Options& o) {
    const Volume v = generate_phantom(phantom_spec_of(o));
    save_volume(v, o.output, {{"kind", "phantom"}, {"seed", std::to_string(o.seed)}});
    return kOk;
}

int cmd_simulate(const Options& o) {
    const Volume v = load_volume_input(o.input);
    AngleSpec spec{o.range, o.step, o.center};
    if (o.random_acquisition) {
        AcquisitionSampler sampler(o.seed);
        spec = sampler.next();
    }
    spec.validate();
    const TiltSeries y = synthesize_haadf(v, spec, contrast_of(o));
    save_tilts(y, o.output, {{"kind", "haadf"}, {"depth", std::to_string(v.dims().depth)}});
    return kOk;
}

std::unique_ptr<Denoiser> make_denoiser(const Options& o, Dims dims) {
    const std::string& d = o.denoiser;
    if (d == "zero") return std::make_unique<ZeroDenoiser>();
    if (d == "smoothing") return std::make_unique<SmoothingDenoiser>(o.sigma);
    if (d.rfind("oracle:", 0) == 0) {
        return std::make_unique<OracleDenoiser>(load_volume_input(d.substr(7)));
    }
    if (d.rfind("external:", 0) == 0) {
        return std::make_unique<ExternalDenoiser>(
            open_external_session(split_command(d.substr(9)), dims, o.timeout));
    }
    throw ValidationError("--denoiser must be zero, smoothing, oracle:<path> or external:<cmd>");
}

int cmd_reconstruct(const Options& o) {
    Metadata meta;
    const TiltSeries y = load_tilt_input(o.input, meta);
    const AngleSpec spec = y.angles();
    const int depth = depth_of(meta, o.depth);
    const Dims dims{depth, y.height(), y.width()};
    dims.validate();

    Volume out;
    if (o.method == "fbp") {
        out = fbp(y, spec, depth, parse_filter(o.filter));
    } else if (o.method == "sart") {
        if (o.iters < 1) throw ValidationError("--iters must be >= 1");
        std::optional<double> lambda;
        if (o.lambda > 0.0) lambda = o.lambda;
        SartResult r = sart(y, spec, depth, o.iters, lambda);
        for (std::size_t i = 1; i < r.residuals.size(); ++i) {
            progress(o, static_cast<int>(i), r.residuals[i]);
        }
        out = std::move(r.volume);
    } else if (o.method == "diffusion") {
        if (o.denoiser.empty()) throw ValidationError("--method diffusion requires --denoiser");
        if (o.proj_steps < 1) throw ValidationError("--proj-steps must be >= 1");
        GuidanceConfig cfg;
        cfg.cfg_scale = o.cfg_scale;
        cfg.schedule = make_schedule(o.steps, parse_schedule_kind(o.schedule));
        cfg.projector = o.lambda > 0.0 ? ProjectorConfig{o.proj_steps, o.lambda}
                                       : default_projector_config(dims, spec, o.proj_steps);
        cfg.seed = o.seed;
        cfg.use_uncertainty = !o.no_uncertainty && y.n_tilts() >= 2;
        cfg.on_step = [&](const StepProgress& p) { progress(o, p.step, p.residual); };
        cfg.validate();
        auto denoiser = make_denoiser(o, dims);
        out = guided_sample(y, spec, depth, *denoiser, cfg);
        if (auto* ext = dynamic_cast<ExternalDenoiser*>(denoiser.get())) ext->session().close();
    } else {
        throw ValidationError("--method must be fbp, sart or diffusion");
    }
    save_volume(out, o.output, {{"kind", "reconstruction"}, {"method", o.method}});
    return kOk;
}

int cmd_uncertainty(const Options& o) {
    Metadata meta;
    const TiltSeries y = load_tilt_input(o.input, meta);
    const UncertaintyMap u = compute_uncertainty(y, y.angles(), depth_of(meta, o.depth));
    save_volume(u.as_volume(), o.output, {{"kind", "uncertainty"}});
    return kOk;
}

int cmd_evaluate(const Options& o) {
    const Volume recon = load_volume_input(o.recon);
    const Volume reference = load_volume_input(o.reference);
    const MetricReport r = evaluate(recon, reference, !o.no_align);
    const std::string text = r.to_text();
    std::cout << text;
    if (!o.output.empty()) {
        std::ofstream out(o.output);
        out << text;
        if (!out) throw RuntimeError("cannot write " + o.output);
    }
    if (!o.manifest.empty()) {
        const bool fresh = !std::filesystem::exists(o.manifest);
        std::ofstream out(o.manifest, std::ios::app);
        if (fresh) out << MetricReport::manifest_header() << "\n";
        out << r.manifest_row(o.recon, o.reference) << "\n";
        if (!out) throw RuntimeError("cannot append to " + o.manifest);
    }
    return kOk;
}

int cmd_export(const Options& o) {
    const Volume v = load_volume_input(o.input);
    SliceNormalization norm;
    if (o.normalize == "global") {
        norm = SliceNormalization::global;
    } else if (o.normalize == "per_slice") {
        norm = SliceNormalization::per_slice;
    } else {
        throw ValidationError("--normalize must be global or per_slice");
    }
    const auto files = export_slices(v, o.axis, o.prefix, norm);
    if (!o.quiet) std::fprintf(stderr, "wrote %zu slices\n", files.size());
    return kOk;
}

int cmd_dataset(const Options& o) {
    const auto records = write_dataset(o.dir, o.count, phantom_spec_of(o), contrast_of(o), o.seed);
    if (!o.quiet) std::fprintf(stderr, "wrote %zu samples to %s\n", records.size(), o.dir.c_str());
    return kOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
    Options o;
    CLI::App app{"Limited-angle tomography reconstruction toolkit", "latomo"};
    app.fallthrough();
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value configuration file (flags override it)");
    app.add_option("--seed", o.seed, "Seed for every random draw");
    app.add_option("--threads", o.threads, "Cap on internal parallelism")->check(CLI::PositiveNumber);
    app.add_flag("--quiet", o.quiet, "Suppress progress output");

    auto* phantom = app.add_subcommand("phantom", "Generate a synthetic phantom volume (TDVOL1)");
    phantom->add_option("--dims", o.dims, "Extents HxWxD")->capture_default_str();
    phantom->add_option("--min-shells", o.min_shells);
    phantom->add_option("--max-shells", o.max_shells);
    phantom->add_option("--min-blobs", o.min_blobs);
    phantom->add_option("--max-blobs", o.max_blobs);
    phantom->add_option("-o,--output", o.output)->required();

    auto add_contrast = [&](CLI::App* sub) {
        sub->add_option("--contrast-c", o.contrast_c, "Attenuation constant C")->capture_default_str();
        sub->add_option("--gamma", o.gamma, "Contrast exponent")->capture_default_str();
        sub->add_option("--k", o.k, "Intensity scale")->capture_default_str();
        sub->add_option("--noise-sigma", o.noise_sigma, "Additive Gaussian noise")->capture_default_str();
    };

    auto* simulate = app.add_subcommand("simulate", "Synthesize a HAADF tilt series (TDTLT1)");
    simulate->add_option("-i,--input", o.input)->required();
    simulate->add_option("-o,--output", o.output)->required();
    simulate->add_option("--range", o.range, "Angular range in degrees")->capture_default_str();
    simulate->add_option("--step", o.step, "Angular increment in degrees")->capture_default_str();
    simulate->add_option("--center", o.center, "Centre angle in degrees")->capture_default_str();
    simulate->add_flag("--random-acquisition", o.random_acquisition,
                       "Draw range in [6,14] and step in [1,3] from --seed");
    add_contrast(simulate);

    auto* recon = app.add_subcommand("reconstruct", "Reconstruct a volume from a tilt series");
    recon->add_option("-i,--input", o.input)->required();
    recon->add_option("-o,--output", o.output)->required();
    recon->add_option("--method", o.method)->required()->check(CLI::IsMember({"fbp", "sart", "diffusion"}));
    recon->add_option("--filter", o.filter, "FBP filter: ramp, ramp_hann, none")->capture_default_str();
    recon->add_option("--iters", o.iters, "SART iterations")->capture_default_str();
    recon->add_option("--lambda", o.lambda, "Gradient step size (default 1/L)");
    recon->add_option("--depth", o.depth, "Volume depth (default from the tilt file)");
    recon->add_option("--denoiser", o.denoiser, "zero | smoothing | oracle:<path> | external:<cmd>");
    recon->add_option("--steps", o.steps, "Diffusion schedule points N")->capture_default_str();
    recon->add_option("--cfg-scale", o.cfg_scale, "Guidance scale s")->capture_default_str();
    recon->add_option("--proj-steps", o.proj_steps, "Projector steps per diffusion step")->capture_default_str();
    recon->add_option("--schedule", o.schedule, "cosine | linear")->capture_default_str();
    recon->add_option("--sigma", o.sigma, "Blur sigma of the smoothing denoiser")->capture_default_str();
    recon->add_flag("--no-uncertainty", o.no_uncertainty, "Force u = 0 (always projected)");
    recon->add_option("--timeout", o.timeout, "External denoiser timeout in seconds")->capture_default_str();

    auto* unc = app.add_subcommand("uncertainty", "Compute the per-voxel uncertainty map");
    unc->add_option("-i,--input", o.input)->required();
    unc->add_option("-o,--output", o.output)->required();
    unc->add_option("--depth", o.depth, "Volume depth (default from the tilt file)");

    auto* eval = app.add_subcommand("evaluate", "Compare a reconstruction with a reference");
    eval->add_option("--recon", o.recon)->required();
    eval->add_option("--reference", o.reference)->required();
    eval->add_flag("--no-align", o.no_align, "Skip quartile alignment");
    eval->add_option("-o,--output", o.output, "Also write the report here");
    eval->add_option("--manifest", o.manifest, "Append a CSV row to this file");

    auto* exp = app.add_subcommand("export", "Write slices as 8-bit PNGs");
    exp->add_option("-i,--input", o.input)->required();
    exp->add_option("--axis", o.axis)->check(CLI::Range(0, 2))->capture_default_str();
    exp->add_option("--prefix", o.prefix)->required();
    exp->add_option("--normalize", o.normalize, "global | per_slice")->capture_default_str();

    auto* ds = app.add_subcommand("dataset", "Write a simulated training dataset with manifest");
    ds->add_option("--dir", o.dir)->required();
    ds->add_option("--count", o.count)->capture_default_str();
    ds->add_option("--dims", o.dims, "Extents HxWxD")->capture_default_str();
    ds->add_option("--min-shells", o.min_shells);
    ds->add_option("--max-shells", o.max_shells);
    ds->add_option("--min-blobs", o.min_blobs);
    ds->add_option("--max-blobs", o.max_blobs);
    add_contrast(ds);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    const int previous_threads = num_threads();
    set_num_threads(o.threads);
    struct RestoreThreads {
        int n;
        ~RestoreThreads() { set_num_threads(n); }
    } restore{previous_threads};

    try {
        if (*phantom) return cmd_phantom(o);
        if (*simulate) return cmd_simulate(o);
        if (*recon) return cmd_reconstruct(o);
        if (*unc) return cmd_uncertainty(o);
        if (*eval) return cmd_evaluate(o);
        if (*exp) return cmd_export(o);
        if (*ds) return cmd_dataset(o);
    } catch (const ProtocolError& e) {
        std::fprintf(stderr, "protocol error: %s\n", e.what());
        return kProtocol;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return kValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kRuntime;
    }
    return kValidation;
}

}  // namespace latomo::cli
