#include "commands.hpp"

#include "drface/mesh.hpp"
#include "drface/training.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <set>
#include <string>

using namespace drface;

namespace {

// Loads a JSON config file and rejects keys that are not recognized options.
// Flag values given on the command line win over file values.
nlohmann::json load_config(const std::string& path, const std::set<std::string>& known) {
    std::ifstream in(path);
    if (!in) {
        throw CLI::ValidationError("--config", "cannot open " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw CLI::ValidationError("--config", std::string("bad JSON: ") + e.what());
    }
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) {
            throw CLI::ValidationError("--config", "unknown key '" + key + "'");
        }
    }
    return j;
}

template <typename T>
void apply_config(const nlohmann::json& config, const std::string& key, const CLI::Option* opt,
                  T& value) {
    if (config.contains(key) && opt->count() == 0) {
        value = config.at(key).get<T>();
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Disentangled 3D face shape toolkit: deformation features, spectral-conv "
                 "decomposition/fusion networks, bilinear baseline, synthetic corpus"};
    app.require_subcommand(1);

    // --- synth ---------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Generate the synthetic face corpus");
    CorpusSpec spec;
    std::string synth_out, synth_config;
    auto* synth_seed_opt = synth->add_option("--seed", spec.seed, "RNG seed");
    auto* synth_grid_opt = synth->add_option("--grid", spec.grid, "vertices per patch side");
    auto* synth_ids_opt = synth->add_option("--identities", spec.identities, "identity count");
    auto* synth_exps_opt = synth->add_option("--expressions", spec.expressions, "expression count");
    synth->add_option("--config", synth_config, "JSON config (flags win)");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->callback([&] {
        if (!synth_config.empty()) {
            const auto cfg = load_config(synth_config, {"seed", "grid", "identities", "expressions",
                                                        "holdout_identities", "identity_amplitude",
                                                        "expression_scale", "coupling"});
            apply_config(cfg, "seed", synth_seed_opt, spec.seed);
            apply_config(cfg, "grid", synth_grid_opt, spec.grid);
            apply_config(cfg, "identities", synth_ids_opt, spec.identities);
            apply_config(cfg, "expressions", synth_exps_opt, spec.expressions);
            if (cfg.contains("holdout_identities"))
                spec.holdout_identities = cfg.at("holdout_identities").get<int>();
            if (cfg.contains("identity_amplitude"))
                spec.identity_amplitude = cfg.at("identity_amplitude").get<double>();
            if (cfg.contains("expression_scale"))
                spec.expression_scale = cfg.at("expression_scale").get<double>();
            if (cfg.contains("coupling")) spec.coupling = cfg.at("coupling").get<double>();
        }
        cli::cmd_synth(spec, synth_out);
    });

    // --- dr-encode / dr-decode ------------------------------------------
    auto* enc = app.add_subcommand("dr-encode", "Mesh -> deformation feature (DRF)");
    std::string enc_ref, enc_in, enc_out;
    enc->add_option("--ref", enc_ref, "reference mesh (OBJ)")->required();
    enc->add_option("--in", enc_in, "input mesh (OBJ)")->required();
    enc->add_option("--out", enc_out, "output feature (DRF)")->required();
    enc->callback([&] { cli::cmd_dr_encode(enc_ref, enc_in, enc_out); });

    auto* dec = app.add_subcommand("dr-decode", "Deformation feature (DRF) -> mesh");
    std::string dec_ref, dec_in, dec_out;
    dec->add_option("--ref", dec_ref, "reference mesh (OBJ)")->required();
    dec->add_option("--in", dec_in, "input feature (DRF)")->required();
    dec->add_option("--out", dec_out, "output mesh (OBJ)")->required();
    dec->callback([&] { cli::cmd_dr_decode(dec_ref, dec_in, dec_out); });

    // --- augment ---------------------------------------------------------
    auto* aug = app.add_subcommand("augment", "Bootstrap-interpolate new identity features");
    std::string aug_corpus, aug_out;
    int aug_count = 2000, aug_m = 5;
    std::uint64_t aug_seed = 0;
    aug->add_option("--corpus", aug_corpus, "corpus directory")->required();
    aug->add_option("--count", aug_count, "number of augmented features");
    aug->add_option("--m", aug_m, "source features per draw");
    aug->add_option("--seed", aug_seed, "RNG seed");
    aug->add_option("--out", aug_out, "output directory")->required();
    aug->callback([&] { cli::cmd_augment(aug_corpus, aug_count, aug_m, aug_seed, aug_out); });

    // --- train -----------------------------------------------------------
    auto* tr = app.add_subcommand("train", "Three-stage training on a corpus directory");
    std::string tr_corpus, tr_aug, tr_out, tr_config;
    TrainConfig tc;
    auto* tr_seed = tr->add_option("--seed", tc.seed, "RNG seed");
    auto* tr_epochs = tr->add_option("--epochs", tc.epochs_per_stage, "epochs per stage");
    auto* tr_batch = tr->add_option("--batch-size", tc.batch_size, "batch size");
    auto* tr_lr = tr->add_option("--lr", tc.learning_rate, "learning rate");
    auto* tr_lid = tr->add_option("--latent-id", tc.latent_id, "identity latent size");
    auto* tr_lexp = tr->add_option("--latent-exp", tc.latent_exp, "expression latent size");
    tr->add_option("--corpus", tr_corpus, "corpus directory")->required();
    tr->add_option("--aug", tr_aug, "augmented feature directory (optional)");
    tr->add_option("--config", tr_config, "JSON config (flags win)");
    tr->add_option("--out", tr_out, "output directory")->required();
    tr->callback([&] {
        if (!tr_config.empty()) {
            const auto cfg = load_config(
                tr_config, {"seed", "epochs_per_stage", "batch_size", "learning_rate", "lr_decay",
                            "lr_decay_every", "alpha_id_kld", "alpha_exp_kld", "adam_beta1",
                            "adam_beta2", "adam_eps", "latent_id", "latent_exp"});
            apply_config(cfg, "seed", tr_seed, tc.seed);
            apply_config(cfg, "epochs_per_stage", tr_epochs, tc.epochs_per_stage);
            apply_config(cfg, "batch_size", tr_batch, tc.batch_size);
            apply_config(cfg, "learning_rate", tr_lr, tc.learning_rate);
            apply_config(cfg, "latent_id", tr_lid, tc.latent_id);
            apply_config(cfg, "latent_exp", tr_lexp, tc.latent_exp);
            if (cfg.contains("lr_decay")) tc.lr_decay = cfg.at("lr_decay").get<double>();
            if (cfg.contains("lr_decay_every"))
                tc.lr_decay_every = cfg.at("lr_decay_every").get<int>();
            if (cfg.contains("alpha_id_kld")) tc.alpha_id_kld = cfg.at("alpha_id_kld").get<double>();
            if (cfg.contains("alpha_exp_kld"))
                tc.alpha_exp_kld = cfg.at("alpha_exp_kld").get<double>();
            if (cfg.contains("adam_beta1")) tc.adam_beta1 = cfg.at("adam_beta1").get<double>();
            if (cfg.contains("adam_beta2")) tc.adam_beta2 = cfg.at("adam_beta2").get<double>();
            if (cfg.contains("adam_eps")) tc.adam_eps = cfg.at("adam_eps").get<double>();
        }
        cli::cmd_train(tr_corpus, tr_aug, tc.to_json(), tr_out);
    });

    // --- decompose / transfer / interp ------------------------------------
    auto* dc = app.add_subcommand("decompose", "Emit identity/expression meshes for an input");
    std::string dc_model, dc_ref, dc_in, dc_out;
    dc->add_option("--model", dc_model, "model.json path")->required();
    dc->add_option("--ref", dc_ref, "reference mesh (OBJ)")->required();
    dc->add_option("--in", dc_in, "input mesh (OBJ)")->required();
    dc->add_option("--out", dc_out, "output directory")->required();
    dc->callback([&] { cli::cmd_decompose(dc_model, dc_ref, dc_in, dc_out); });

    auto* tf = app.add_subcommand("transfer", "Apply the source's expression code to the target");
    std::string tf_model, tf_ref, tf_src, tf_tgt, tf_out;
    tf->add_option("--model", tf_model, "model.json path")->required();
    tf->add_option("--ref", tf_ref, "reference mesh (OBJ)")->required();
    tf->add_option("--source", tf_src, "source mesh (OBJ)")->required();
    tf->add_option("--target", tf_tgt, "target mesh (OBJ)")->required();
    tf->add_option("--out", tf_out, "output mesh (OBJ)")->required();
    tf->callback([&] { cli::cmd_transfer(tf_model, tf_ref, tf_src, tf_tgt, tf_out); });

    auto* ip = app.add_subcommand("interp", "Latent-space interpolation grid between two meshes");
    std::string ip_model, ip_ref, ip_m0, ip_m1, ip_out;
    double ip_stride = 0.25;
    ip->add_option("--model", ip_model, "model.json path")->required();
    ip->add_option("--ref", ip_ref, "reference mesh (OBJ)")->required();
    ip->add_option("--m0", ip_m0, "first mesh (OBJ)")->required();
    ip->add_option("--m1", ip_m1, "second mesh (OBJ)")->required();
    ip->add_option("--stride", ip_stride, "interpolation step (default 0.25)");
    ip->add_option("--out", ip_out, "output directory")->required();
    ip->callback([&] { cli::cmd_interp(ip_model, ip_ref, ip_m0, ip_m1, ip_stride, ip_out); });

    // --- bilinear baseline -------------------------------------------------
    auto* bb = app.add_subcommand("bilinear-build", "Build the truncated bilinear core");
    std::string bb_corpus, bb_out;
    int bb_kid = 50, bb_kexp = 25;
    bb->add_option("--corpus", bb_corpus, "corpus directory")->required();
    bb->add_option("--k-id", bb_kid, "identity mode truncation");
    bb->add_option("--k-exp", bb_kexp, "expression mode truncation");
    bb->add_option("--out", bb_out, "output core.json path")->required();
    bb->callback([&] { cli::cmd_bilinear_build(bb_corpus, bb_kid, bb_kexp, bb_out); });

    auto* bf = app.add_subcommand("bilinear-fit", "ALS-fit bilinear coefficients to a mesh");
    std::string bf_core, bf_in, bf_out;
    bf->add_option("--core", bf_core, "core.json path")->required();
    bf->add_option("--in", bf_in, "input mesh (OBJ)")->required();
    bf->add_option("--out", bf_out, "output fit JSON")->required();
    bf->callback([&] { cli::cmd_bilinear_fit(bf_core, bf_in, bf_out); });

    auto* bt = app.add_subcommand("bilinear-transfer", "Expression transfer via the bilinear core");
    std::string bt_core, bt_src, bt_tgt, bt_out;
    bt->add_option("--core", bt_core, "core.json path")->required();
    bt->add_option("--source", bt_src, "source mesh (OBJ)")->required();
    bt->add_option("--target", bt_tgt, "target mesh (OBJ)")->required();
    bt->add_option("--out", bt_out, "output mesh (OBJ)")->required();
    bt->callback([&] { cli::cmd_bilinear_transfer(bt_core, bt_src, bt_tgt, bt_out); });

    // --- eval ---------------------------------------------------------------
    auto* ev = app.add_subcommand("eval", "Reconstruction / decomposition metrics as CSV");
    std::string ev_orig, ev_recon, ev_set, ev_out;
    ev->add_option("--orig", ev_orig, "original mesh or directory");
    ev->add_option("--recon", ev_recon, "reconstructed mesh or directory");
    ev->add_option("--set", ev_set, "mesh set directory for decomposition_std");
    ev->add_option("--out", ev_out, "output CSV (stdout if omitted)");
    ev->callback([&] {
        if (ev_set.empty() && (ev_orig.empty() || ev_recon.empty())) {
            throw CLI::ValidationError("eval", "need --orig and --recon, or --set");
        }
        cli::cmd_eval(ev_orig, ev_recon, ev_set, ev_out);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
