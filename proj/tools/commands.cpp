#include "commands.hpp"

#include "drface/augmentation.hpp"
#include "drface/bilinear.hpp"
#include "drface/metrics.hpp"
#include "drface/network.hpp"
#include "drface/training.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace drface::cli {

namespace fs = std::filesystem;

namespace {

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    return j;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot open " + path + " for writing");
    }
    out << j.dump(2) << "\n";
}

std::string mesh_name(int identity, int expression) {
    return std::to_string(identity) + "_" + std::to_string(expression) + ".obj";
}

ModelParams load_model_checked(const std::string& model_path, const ReferenceFrame& ref) {
    ModelParams model = load_model(model_path);
    if (!model.reference_id.empty() && model.reference_id != ref.id()) {
        throw DataError("model " + model_path + " was trained against a different reference mesh");
    }
    return model;
}

Eigen::SparseMatrix<double> model_laplacian(const ReferenceFrame& ref) {
    return scaled_laplacian(normalized_laplacian(ref.mesh()));
}

} // namespace

void save_corpus_dir(const Corpus& corpus, const std::string& dir) {
    fs::create_directories(dir);
    const fs::path base(dir);
    save_obj(corpus.base, (base / "reference.obj").string());
    for (std::size_t i = 0; i < corpus.meshes.size(); ++i) {
        for (std::size_t e = 0; e < corpus.meshes[i].size(); ++e) {
            save_obj(corpus.meshes[i][e],
                     (base / mesh_name(static_cast<int>(i), static_cast<int>(e))).string());
        }
    }
    for (std::size_t e = 0; e < corpus.mean_expressions.size(); ++e) {
        save_obj(corpus.mean_expressions[e],
                 (base / ("mean_" + std::to_string(e) + ".obj")).string());
    }
    nlohmann::json manifest;
    manifest["spec"] = corpus.spec.to_json();
    manifest["seed"] = corpus.spec.seed;
    manifest["split"] = {{"train", corpus.train_identities}, {"test", corpus.test_identities}};
    write_json_file((base / "manifest.json").string(), manifest);
}

Corpus load_corpus_dir(const std::string& dir) {
    const fs::path base(dir);
    const nlohmann::json manifest = read_json_file((base / "manifest.json").string());
    const CorpusSpec spec = CorpusSpec::from_json(manifest.at("spec"));
    Corpus corpus{spec, load_obj((base / "reference.obj").string()), {}, {}, {}, {}};
    corpus.meshes.reserve(spec.identities);
    for (int i = 0; i < spec.identities; ++i) {
        std::vector<Mesh> row;
        row.reserve(spec.expressions);
        for (int e = 0; e < spec.expressions; ++e) {
            row.push_back(load_obj((base / mesh_name(i, e)).string()));
        }
        corpus.meshes.push_back(std::move(row));
    }
    corpus.mean_expressions.reserve(spec.expressions);
    for (int e = 0; e < spec.expressions; ++e) {
        corpus.mean_expressions.push_back(
            load_obj((base / ("mean_" + std::to_string(e) + ".obj")).string()));
    }
    corpus.train_identities = manifest.at("split").at("train").get<std::vector<int>>();
    corpus.test_identities = manifest.at("split").at("test").get<std::vector<int>>();
    return corpus;
}

void write_run_config(const std::string& out_dir, const std::string& command,
                      const nlohmann::json& resolved) {
    nlohmann::json j;
    j["command"] = command;
    j["resolved"] = resolved;
    write_json_file((fs::path(out_dir) / "run_config.json").string(), j);
}

int cmd_synth(const CorpusSpec& spec, const std::string& out_dir) {
    const Corpus corpus = generate_corpus(spec);
    save_corpus_dir(corpus, out_dir);
    write_run_config(out_dir, "synth", spec.to_json());
    std::cout << "synth: wrote " << spec.identities << "x" << spec.expressions
              << " corpus (n=" << corpus.base.vertex_count() << ") to " << out_dir << "\n";
    return 0;
}

int cmd_dr_encode(const std::string& ref_path, const std::string& in_path,
                  const std::string& out_path) {
    const ReferenceFrame ref(load_obj(ref_path));
    const DRFeature feature = ref.encode(load_obj(in_path));
    save_drf(feature, out_path);
    std::cout << "dr-encode: " << in_path << " -> " << out_path << " (n=" << feature.vertex_count()
              << ")\n";
    return 0;
}

int cmd_dr_decode(const std::string& ref_path, const std::string& in_path,
                  const std::string& out_path) {
    const ReferenceFrame ref(load_obj(ref_path));
    const Mesh mesh = ref.decode(load_drf(in_path));
    save_obj(mesh, out_path);
    std::cout << "dr-decode: " << in_path << " -> " << out_path << "\n";
    return 0;
}

int cmd_augment(const std::string& corpus_dir, int count, int m, std::uint64_t seed,
                const std::string& out_dir) {
    const Corpus corpus = load_corpus_dir(corpus_dir);
    const ReferenceFrame ref(corpus.base);
    std::vector<DRFeature> sources;
    std::vector<std::string> source_files;
    for (int i : corpus.train_identities) {
        sources.push_back(ref.encode(corpus.meshes[i][0]));
        source_files.push_back(mesh_name(i, 0));
    }
    Rng rng(seed);
    const std::vector<DRFeature> augmented = augment_corpus(sources, count, m, rng);
    fs::create_directories(out_dir);
    for (std::size_t k = 0; k < augmented.size(); ++k) {
        save_drf(augmented[k],
                 (fs::path(out_dir) / ("aug_" + std::to_string(k) + ".drf")).string());
    }
    nlohmann::json manifest;
    manifest["seed"] = seed;
    manifest["m"] = m;
    manifest["count"] = count;
    manifest["sources"] = source_files;
    write_json_file((fs::path(out_dir) / "manifest.json").string(), manifest);
    write_run_config(out_dir, "augment", manifest);
    std::cout << "augment: wrote " << augmented.size() << " features to " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& corpus_dir, const std::string& aug_dir,
              const nlohmann::json& train_config_json, const std::string& out_dir) {
    const Corpus corpus = load_corpus_dir(corpus_dir);
    const ReferenceFrame ref(corpus.base);
    const TripletSets sets = build_triplets(corpus, ref);

    TrainData data;
    data.triplets = sets.train;
    data.rest_feature = ref.rest_feature().values;
    data.lap = model_laplacian(ref);
    data.reference_id = ref.id();
    data.vertex_count = corpus.base.vertex_count();

    if (!aug_dir.empty()) {
        // Augmented identity features enter as neutral-face triplets:
        // the face is its own identity and carries the rest expression.
        const nlohmann::json manifest = read_json_file((fs::path(aug_dir) / "manifest.json").string());
        const int count = manifest.at("count").get<int>();
        for (int k = 0; k < count; ++k) {
            DRFeature f =
                load_drf((fs::path(aug_dir) / ("aug_" + std::to_string(k) + ".drf")).string());
            if (f.reference_id != ref.id()) {
                throw DataError("augmented feature " + std::to_string(k) +
                                " does not match the corpus reference");
            }
            Triplet t;
            t.input = f;
            t.identity = f;
            t.expression = ref.rest_feature();
            data.triplets.push_back(std::move(t));
        }
    }

    const TrainConfig config = TrainConfig::from_json(train_config_json);
    const TrainResult result = train(config, data);

    fs::create_directories(out_dir);
    nlohmann::json extra;
    extra["train_config"] = config.to_json();
    save_model(result.model, (fs::path(out_dir) / "model.json").string(), extra);
    write_training_log(result.log, (fs::path(out_dir) / "training_log.csv").string());
    nlohmann::json resolved = config.to_json();
    resolved["corpus"] = corpus_dir;
    resolved["augmented"] = aug_dir;
    write_run_config(out_dir, "train", resolved);
    std::printf("train: %zu triplets, L_total %.6g -> %.6g (%d epochs)\n", data.triplets.size(),
                result.initial_eval.total(), result.final_eval.total(),
                static_cast<int>(result.log.size()));
    return 0;
}

int cmd_decompose(const std::string& model_path, const std::string& ref_path,
                  const std::string& in_path, const std::string& out_dir) {
    const ReferenceFrame ref(load_obj(ref_path));
    const ModelParams model = load_model_checked(model_path, ref);
    const auto lap = model_laplacian(ref);
    const Decomposition parts = decompose_mesh(model, lap, ref, load_obj(in_path));
    fs::create_directories(out_dir);
    save_obj(parts.identity, (fs::path(out_dir) / "identity.obj").string());
    save_obj(parts.expression, (fs::path(out_dir) / "expression.obj").string());
    std::cout << "decompose: wrote identity.obj and expression.obj to " << out_dir << "\n";
    return 0;
}

int cmd_transfer(const std::string& model_path, const std::string& ref_path,
                 const std::string& source_path, const std::string& target_path,
                 const std::string& out_path) {
    const ReferenceFrame ref(load_obj(ref_path));
    const ModelParams model = load_model_checked(model_path, ref);
    const auto lap = model_laplacian(ref);
    const Mesh result =
        transfer_expression(model, lap, ref, load_obj(source_path), load_obj(target_path));
    save_obj(result, out_path);
    std::cout << "transfer: " << source_path << " -> " << target_path << " => " << out_path << "\n";
    return 0;
}

int cmd_interp(const std::string& model_path, const std::string& ref_path,
               const std::string& m0_path, const std::string& m1_path, double stride,
               const std::string& out_dir) {
    const ReferenceFrame ref(load_obj(ref_path));
    const ModelParams model = load_model_checked(model_path, ref);
    const auto lap = model_laplacian(ref);
    const std::vector<Mesh> grid =
        interpolate_latent(model, lap, ref, load_obj(m0_path), load_obj(m1_path), stride);
    const int per_axis = static_cast<int>(std::lround(1.0 / stride)) + 1;
    fs::create_directories(out_dir);
    for (int i = 0; i < per_axis; ++i) {
        for (int j = 0; j < per_axis; ++j) {
            save_obj(grid[static_cast<std::size_t>(i) * per_axis + j],
                     (fs::path(out_dir) /
                      ("interp_" + std::to_string(i) + "_" + std::to_string(j) + ".obj"))
                         .string());
        }
    }
    nlohmann::json resolved;
    resolved["stride"] = stride;
    resolved["m0"] = m0_path;
    resolved["m1"] = m1_path;
    write_run_config(out_dir, "interp", resolved);
    std::cout << "interp: wrote " << grid.size() << " meshes to " << out_dir << "\n";
    return 0;
}

int cmd_bilinear_build(const std::string& corpus_dir, int k_id, int k_exp,
                       const std::string& out_path) {
    const Corpus corpus = load_corpus_dir(corpus_dir);
    std::vector<std::vector<Mesh>> grid;
    for (int i : corpus.train_identities) {
        grid.push_back(corpus.meshes[i]);
    }
    const int clipped_id = std::min<int>(k_id, static_cast<int>(grid.size()));
    const int clipped_exp = std::min<int>(k_exp, corpus.spec.expressions);
    if (clipped_id != k_id || clipped_exp != k_exp) {
        std::cerr << "bilinear-build: clipping (k_id, k_exp) to the grid size (" << clipped_id
                  << ", " << clipped_exp << ")\n";
    }
    const CoreTensor core = build_core(grid, clipped_id, clipped_exp);
    save_core(core, out_path);
    std::cout << "bilinear-build: core " << core.core.rows() << "x" << core.core.cols() << " -> "
              << out_path << "\n";
    return 0;
}

int cmd_bilinear_fit(const std::string& core_path, const std::string& in_path,
                     const std::string& out_path) {
    const CoreTensor core = load_core(core_path);
    const BilinearFit fit = als_fit(core, load_obj(in_path));
    nlohmann::json j;
    j["alpha_id"] = std::vector<double>(fit.alpha_id.data(), fit.alpha_id.data() + fit.alpha_id.size());
    j["alpha_exp"] =
        std::vector<double>(fit.alpha_exp.data(), fit.alpha_exp.data() + fit.alpha_exp.size());
    j["residual_mm"] = fit.residual;
    j["iterations"] = fit.iterations;
    j["residual_log"] = fit.residual_log;
    write_json_file(out_path, j);
    std::printf("bilinear-fit: residual %.6g mm after %d iterations -> %s\n", fit.residual,
                fit.iterations, out_path.c_str());
    return 0;
}

int cmd_bilinear_transfer(const std::string& core_path, const std::string& source_path,
                          const std::string& target_path, const std::string& out_path) {
    const CoreTensor core = load_core(core_path);
    const Mesh result = bilinear_transfer(core, load_obj(source_path), load_obj(target_path));
    save_obj(result, out_path);
    std::cout << "bilinear-transfer: => " << out_path << "\n";
    return 0;
}

namespace {

std::vector<std::pair<std::string, fs::path>> obj_entries(const std::string& path) {
    std::vector<std::pair<std::string, fs::path>> out;
    if (fs::is_directory(path)) {
        for (const auto& entry : fs::directory_iterator(path)) {
            if (entry.path().extension() == ".obj") {
                out.emplace_back(entry.path().stem().string(), entry.path());
            }
        }
        std::sort(out.begin(), out.end());
    } else {
        out.emplace_back(fs::path(path).stem().string(), path);
    }
    return out;
}

} // namespace

int cmd_eval(const std::string& orig, const std::string& recon, const std::string& set_dir,
             const std::string& out_csv) {
    std::string csv = "metric,mesh_id,value\n";
    char line[256];
    if (!set_dir.empty()) {
        std::vector<Mesh> meshes;
        for (const auto& [id, path] : obj_entries(set_dir)) {
            meshes.push_back(load_obj(path.string()));
        }
        const double value = decomposition_std(meshes);
        std::snprintf(line, sizeof line, "decomposition_std,set,%.9g\n", value);
        csv += line;
    } else {
        const auto orig_entries = obj_entries(orig);
        const auto recon_entries = obj_entries(recon);
        if (orig_entries.size() != recon_entries.size()) {
            throw DataError("eval: mesh counts differ between " + orig + " and " + recon);
        }
        MetricReport avd{"e_avd", {}};
        MetricReport sed{"e_sed", {}};
        for (std::size_t k = 0; k < orig_entries.size(); ++k) {
            const Mesh a = load_obj(orig_entries[k].second.string());
            const Mesh b = load_obj(recon_entries[k].second.string());
            avd.per_mesh.emplace_back(orig_entries[k].first, e_avd(a, b));
            sed.per_mesh.emplace_back(orig_entries[k].first, e_sed(a, b));
        }
        for (const MetricReport* report : {&avd, &sed}) {
            for (const auto& [id, v] : report->per_mesh) {
                std::snprintf(line, sizeof line, "%s,%s,%.9g\n", report->metric.c_str(), id.c_str(),
                              v);
                csv += line;
            }
            std::snprintf(line, sizeof line, "%s,mean,%.9g\n", report->metric.c_str(),
                          report->mean());
            csv += line;
            std::snprintf(line, sizeof line, "%s,median,%.9g\n", report->metric.c_str(),
                          report->median());
            csv += line;
        }
    }
    if (out_csv.empty()) {
        std::cout << csv;
    } else {
        std::ofstream out(out_csv);
        if (!out) {
            throw DataError("eval: cannot open " + out_csv + " for writing");
        }
        out << csv;
    }
    return 0;
}

} // namespace drface::cli
