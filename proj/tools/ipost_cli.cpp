// Command-line front end: dataset generation, training, evaluation,
// enrollment, matching, store simulation, and journal verification.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ipost/checkpoint.hpp"
#include "ipost/dataset.hpp"
#include "ipost/layers.hpp"
#include "ipost/protocol.hpp"
#include "ipost/recognizers.hpp"
#include "ipost/simulator.hpp"
#include "ipost/training.hpp"

namespace {

using namespace ipost;

struct GenDataArgs {
    std::string task = "items";
    std::vector<std::string> classes;
    int samples = 50;
    int size = 32;
    int channels = 1;
    float noise = 0.3f;
    std::uint32_t seed = 0;
    std::string out;
};

int run_gen_data(const GenDataArgs& args) {
    SyntheticDatasetSpec spec;
    if (args.task == "items") {
        spec = make_items_spec(args.classes);
    } else if (args.task == "faces") {
        spec = make_faces_spec(args.classes);
    } else {
        std::cerr << "error: --task must be items or faces\n";
        return 2;
    }
    spec.samples_per_class = args.samples;
    spec.image_size = args.size;
    spec.channels = args.channels;
    spec.noise = args.noise;
    spec.seed = args.seed;
    const auto entries = generate_dataset(spec, args.out);
    std::cout << "wrote " << entries.size() << " images and manifest.tsv to " << args.out << "\n";
    return 0;
}

struct TrainArgs {
    std::string manifest;
    std::string arch = "classifier";
    std::string loss = "auto";
    int epochs = 10;
    int batch = 32;
    double lr = 1e-3;
    float dropout = 0.5f;
    double val_fraction = 0.2;
    int embedding_dim = 16;
    double margin = 0.2;
    std::uint32_t seed = 0;
    std::string out;
    std::string metrics_path;
};

int run_train(const TrainArgs& args) {
    const LabeledDataset data = load_labeled_dataset(args.manifest);
    const int num_classes = static_cast<int>(data.label_names.size());
    const TrainValSplit split = split_dataset(data, args.val_fraction, args.seed);

    CnnOptions options;
    options.dropout_rate = args.dropout;

    TrainConfig config;
    config.epochs = args.epochs;
    config.batch_size = args.batch;
    config.seed = args.seed;
    config.learning_rate = args.lr;
    config.triplet_margin = args.margin;

    NetworkGraph net;
    if (args.arch == "classifier") {
        if (args.loss == "bce") {
            config.loss = LossKind::binary_cross_entropy;
        } else if (args.loss == "auto" || args.loss == "ce") {
            config.loss = LossKind::categorical_cross_entropy;
        } else {
            std::cerr << "error: classifier loss must be ce or bce\n";
            return 2;
        }
        net = build_ipost_cnn(split.train.images.front().shape(), num_classes, std::nullopt,
                              options, args.seed);
    } else if (args.arch == "embedder") {
        if (args.loss != "auto" && args.loss != "triplet") {
            std::cerr << "error: embedder training uses the triplet loss\n";
            return 2;
        }
        config.loss = LossKind::triplet;
        net = build_ipost_cnn(split.train.images.front().shape(), num_classes, args.embedding_dim,
                              options, args.seed);
    } else {
        std::cerr << "error: --arch must be classifier or embedder\n";
        return 2;
    }

    AdamState adam = make_adam_state(net, args.lr);
    std::vector<EpochMetrics> history;
    std::cout << metrics_header_line() << "\n";
    for (int epoch = 0; epoch < args.epochs; ++epoch) {
        history.push_back(train_epoch(net, split, config, adam, epoch));
        std::cout << metrics_line(history.back()) << "\n";
    }
    save_checkpoint(net, args.out);
    if (!args.metrics_path.empty()) write_metrics_file(args.metrics_path, history);
    std::cout << "saved checkpoint to " << args.out << "\n";
    return 0;
}

struct EvalArgs {
    std::string manifest;
    std::string checkpoint;
    std::string loss = "ce";
};

int run_eval(const EvalArgs& args) {
    const NetworkGraph net = load_checkpoint(args.checkpoint);
    if (net.layers.back().kind == LayerKind::l2norm) {
        std::cerr << "error: embedding network; use enroll + match instead of eval\n";
        return 1;
    }
    const LabeledDataset data = load_labeled_dataset(args.manifest);
    const LossKind loss =
        args.loss == "bce" ? LossKind::binary_cross_entropy : LossKind::categorical_cross_entropy;
    const EvalResult result = evaluate(net, data, loss);
    std::printf("accuracy\t%.6f\nf1\t%.6f\nmean_loss\t%.6f\n", result.accuracy, result.f1,
                result.mean_loss);
    return 0;
}

struct EnrollArgs {
    std::string manifest;
    std::string checkpoint;
    float threshold = 0.6f;
    std::string out;
};

int run_enroll(const EnrollArgs& args) {
    const NetworkGraph net = load_checkpoint(args.checkpoint);
    const LabeledDataset data = load_labeled_dataset(args.manifest);
    EmbeddingGallery gallery;
    gallery.accept_threshold = args.threshold;
    for (std::size_t label = 0; label < data.label_names.size(); ++label) {
        std::vector<Tensor> images;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (data.labels[i] == static_cast<int>(label)) images.push_back(data.images[i]);
        }
        enroll(gallery, data.label_names[label], images, net);
    }
    save_gallery(gallery, args.out);
    std::cout << "enrolled " << gallery.identity_count() << " identities ("
              << gallery.embedding_count() << " embeddings) to " << args.out << "\n";
    return 0;
}

struct MatchArgs {
    std::string image;
    std::string checkpoint;
    std::string gallery;
};

int run_match(const MatchArgs& args) {
    const NetworkGraph net = load_checkpoint(args.checkpoint);
    const EmbeddingGallery gallery = load_gallery(args.gallery);
    const Tensor probe = image_to_tensor(read_pixmap(args.image));
    const MatchResult result = match_face(gallery, embed_face(net, probe));
    std::printf("decision\t%s\n", result.decision == MatchDecision::accepted ? "accepted" : "unknown");
    std::printf("identity\t%s\n", result.identity.empty() ? "-" : result.identity.c_str());
    std::printf("distance\t%.6f\n", result.best_distance);
    std::printf("similarity\t%.6f\n", result.similarity_index);
    return 0;
}

struct SimulateArgs {
    std::string item_net;
    std::string face_net;
    std::string gallery;
    std::vector<std::string> item_classes;
    std::vector<std::string> identities;
    std::vector<std::string> prices;  // label=minor_units
    int shoppers = 100;
    std::uint32_t seed = 0;
    float noise = 0.3f;
    double unknown_fraction = 0.0;
    double mean_picks = 4.0;
    double putback_prob = 0.2;
    double mean_arrival_ms = 1500.0;
    double mean_action_ms = 2000.0;
    std::int64_t ttl_ms = 30 * 60 * 1000;
    double confidence_floor = 0.5;
    std::string journal_path;
    std::string report_path;
};

SyntheticDatasetSpec spec_for_network(SyntheticDatasetSpec spec, const NetworkGraph& net,
                                      const char* which) {
    const Shape& in = net.input_shape;
    if (in.rank() != 3 || in.extent(1) != in.extent(2)) {
        throw std::runtime_error(std::string(which) + " network input must be square (C,H,W)");
    }
    spec.channels = in.extent(0);
    spec.image_size = in.extent(1);
    return spec;
}

int run_simulate(const SimulateArgs& args) {
    const NetworkGraph item_net = load_checkpoint(args.item_net);
    const NetworkGraph face_net = load_checkpoint(args.face_net);
    const EmbeddingGallery gallery = load_gallery(args.gallery);

    SyntheticDatasetSpec item_spec = spec_for_network(make_items_spec(args.item_classes), item_net, "item");
    SyntheticDatasetSpec face_spec = spec_for_network(make_faces_spec(args.identities), face_net, "face");
    item_spec.noise = args.noise;
    face_spec.noise = args.noise;

    ScenarioConfig scenario;
    scenario.shopper_count = args.shoppers;
    scenario.seed = args.seed;
    scenario.unknown_face_fraction = args.unknown_fraction;
    scenario.mean_picks = args.mean_picks;
    scenario.putback_probability = args.putback_prob;
    scenario.mean_arrival_gap_ms = args.mean_arrival_ms;
    scenario.mean_action_gap_ms = args.mean_action_ms;
    scenario.engine.token_ttl = args.ttl_ms;
    scenario.engine.confidence_floor = args.confidence_floor;

    if (args.prices.empty()) {
        // deterministic default price list over the sorted class names
        std::vector<std::string> sorted = args.item_classes;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            scenario.engine.price_table[sorted[i]] = 100 * static_cast<std::int64_t>(i + 1);
        }
    } else {
        for (const auto& entry : args.prices) {
            const auto eq = entry.find('=');
            if (eq == std::string::npos || eq == 0 || eq + 1 >= entry.size()) {
                std::cerr << "error: --price expects label=minor_units, got '" << entry << "'\n";
                return 2;
            }
            scenario.engine.price_table[entry.substr(0, eq)] = std::stoll(entry.substr(eq + 1));
        }
    }

    const SimulationReport report =
        simulate(scenario, item_spec, item_net, face_spec, face_net, gallery);
    const std::string text = serialize_report(report);
    if (args.report_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(args.report_path, std::ios::binary);
        out << text;
        if (!out) {
            std::cerr << "error: cannot write report to " << args.report_path << "\n";
            return 1;
        }
        std::cout << "wrote report to " << args.report_path << "\n";
    }
    if (!args.journal_path.empty()) {
        std::ofstream out(args.journal_path, std::ios::binary);
        out << report.journal_text;
        if (!out) {
            std::cerr << "error: cannot write journal to " << args.journal_path << "\n";
            return 1;
        }
        std::cout << "wrote journal to " << args.journal_path << "\n";
    }
    if (!report.violations.empty()) {
        std::cerr << "error: " << report.violations.size() << " protocol violations detected\n";
        return 1;
    }
    return 0;
}

int run_journal_verify(const std::string& path) {
    std::string message;
    if (verify_journal_file(path, &message)) {
        const SettlementJournal journal = load_journal_file(path);
        std::cout << "ok\t" << journal.records().size() << " records\n";
        return 0;
    }
    std::cerr << "error: " << message << "\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale cashier-less checkout: synthetic data, CNN training, store simulation"};
    app.require_subcommand(1);

    GenDataArgs gen_args;
    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic glyph dataset");
    gen->add_option("--task", gen_args.task, "items or faces")->check(CLI::IsMember({"items", "faces"}));
    gen->add_option("--classes", gen_args.classes,
                    "comma-separated glyph names (items) or identity names (faces)")
        ->required()
        ->delimiter(',');
    gen->add_option("--samples", gen_args.samples, "images per class");
    gen->add_option("--size", gen_args.size, "image height and width");
    gen->add_option("--channels", gen_args.channels, "1 (pgm) or 3 (ppm)");
    gen->add_option("--noise", gen_args.noise, "pixel noise amplitude in [0,1)");
    gen->add_option("--seed", gen_args.seed, "generator seed");
    gen->add_option("--out", gen_args.out, "output directory")->required();

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train a classifier or face embedder");
    train->add_option("--manifest", train_args.manifest, "dataset manifest")->required();
    train->add_option("--arch", train_args.arch, "classifier or embedder")
        ->check(CLI::IsMember({"classifier", "embedder"}));
    train->add_option("--loss", train_args.loss, "ce, bce, or triplet")
        ->check(CLI::IsMember({"auto", "ce", "bce", "triplet"}));
    train->add_option("--epochs", train_args.epochs, "training epochs");
    train->add_option("--batch", train_args.batch, "batch size");
    train->add_option("--lr", train_args.lr, "Adam learning rate");
    train->add_option("--dropout", train_args.dropout, "dropout rate in [0,1)");
    train->add_option("--val-fraction", train_args.val_fraction, "validation split fraction");
    train->add_option("--embedding-dim", train_args.embedding_dim, "embedder output width");
    train->add_option("--margin", train_args.margin, "triplet margin");
    train->add_option("--seed", train_args.seed, "shuffle / init seed");
    train->add_option("--out", train_args.out, "checkpoint path")->required();
    train->add_option("--metrics", train_args.metrics_path, "per-epoch metrics file");

    EvalArgs eval_args;
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a classifier checkpoint");
    eval_cmd->add_option("--manifest", eval_args.manifest, "dataset manifest")->required();
    eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "network checkpoint")->required();
    eval_cmd->add_option("--loss", eval_args.loss, "ce or bce")->check(CLI::IsMember({"ce", "bce"}));

    EnrollArgs enroll_args;
    CLI::App* enroll_cmd = app.add_subcommand("enroll", "build an enrollment gallery");
    enroll_cmd->add_option("--manifest", enroll_args.manifest, "face dataset manifest")->required();
    enroll_cmd->add_option("--checkpoint", enroll_args.checkpoint, "embedder checkpoint")->required();
    enroll_cmd->add_option("--threshold", enroll_args.threshold, "accept distance threshold");
    enroll_cmd->add_option("--out", enroll_args.out, "gallery path")->required();

    MatchArgs match_args;
    CLI::App* match_cmd = app.add_subcommand("match", "match one probe image against a gallery");
    match_cmd->add_option("--image", match_args.image, "probe pgm/ppm")->required();
    match_cmd->add_option("--checkpoint", match_args.checkpoint, "embedder checkpoint")->required();
    match_cmd->add_option("--gallery", match_args.gallery, "gallery path")->required();

    SimulateArgs sim_args;
    CLI::App* sim = app.add_subcommand("simulate", "run a simulated store day");
    sim->add_option("--item-net", sim_args.item_net, "item classifier checkpoint")->required();
    sim->add_option("--face-net", sim_args.face_net, "face embedder checkpoint")->required();
    sim->add_option("--gallery", sim_args.gallery, "enrollment gallery")->required();
    sim->add_option("--item-classes", sim_args.item_classes, "glyph names the classifier was trained on")
        ->required()
        ->delimiter(',');
    sim->add_option("--identities", sim_args.identities, "enrolled identity names")
        ->required()
        ->delimiter(',');
    sim->add_option("--price", sim_args.prices, "label=minor_units (repeatable)");
    sim->add_option("--shoppers", sim_args.shoppers, "number of shoppers");
    sim->add_option("--seed", sim_args.seed, "scenario seed");
    sim->add_option("--noise", sim_args.noise, "render noise amplitude");
    sim->add_option("--unknown-fraction", sim_args.unknown_fraction, "fraction of unenrolled shoppers");
    sim->add_option("--mean-picks", sim_args.mean_picks, "Poisson mean picks per shopper");
    sim->add_option("--putback-prob", sim_args.putback_prob, "putback probability per pick");
    sim->add_option("--mean-arrival-ms", sim_args.mean_arrival_ms, "mean arrival gap");
    sim->add_option("--mean-action-ms", sim_args.mean_action_ms, "mean action gap");
    sim->add_option("--ttl-ms", sim_args.ttl_ms, "auth token time to live");
    sim->add_option("--confidence-floor", sim_args.confidence_floor, "item event confidence floor");
    sim->add_option("--journal", sim_args.journal_path, "settlement journal output path");
    sim->add_option("--report", sim_args.report_path, "report output path (default stdout)");

    std::string journal_path;
    CLI::App* verify = app.add_subcommand("journal-verify", "check a settlement journal file");
    verify->add_option("--journal", journal_path, "journal path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) return run_gen_data(gen_args);
        if (train->parsed()) return run_train(train_args);
        if (eval_cmd->parsed()) return run_eval(eval_args);
        if (enroll_cmd->parsed()) return run_enroll(enroll_args);
        if (match_cmd->parsed()) return run_match(match_args);
        if (sim->parsed()) return run_simulate(sim_args);
        if (verify->parsed()) return run_journal_verify(journal_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
