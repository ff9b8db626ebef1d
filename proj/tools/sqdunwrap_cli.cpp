#include <iostream>

#include <CLI11.hpp>

#include "sqdunwrap/commands.hpp"

using namespace sqdunwrap;

int main(int argc, char **argv) {
    CLI::App app{"Deep-learning and quality-guided 2-D phase unwrapping"};
    app.require_subcommand(1);

    GenOptions gen;
    auto *g = app.add_subcommand("gen", "generate a synthetic wrapped/true phase dataset");
    g->add_option("--out", gen.out, "output directory")->required();
    g->add_option("--count", gen.count, "number of images")->capture_default_str();
    g->add_option("--size", gen.size, "image side length in pixels")->capture_default_str();
    g->add_option("--seed", gen.seed, "generator seed")->capture_default_str();
    g->add_option("--noise", gen.noise, "SNR menu in dB, e.g. 0,5,10,20,60")->delimiter(',');
    g->add_option("--stages", gen.stages, "network stages the size must support")
        ->capture_default_str();
    g->add_option("--threads", gen.threads, "worker threads (0 = auto)");

    TrainOptions tr;
    auto *t = app.add_subcommand("train", "train the network; writes checkpoint and history");
    t->add_option("--data", tr.data, "dataset directory")->required();
    t->add_option("--out", tr.out, "output directory")->required();
    t->add_option("--loss", tr.loss, "lc or mse")->capture_default_str();
    t->add_option("--pooling", tr.pooling, "per_image or joint loss statistics")
        ->capture_default_str();
    t->add_flag("--no-sqd", tr.no_sqd, "plain U-Net without the recurrent bottleneck");
    t->add_option("--epochs", tr.epochs)->capture_default_str();
    t->add_option("--batch", tr.batch)->capture_default_str();
    t->add_option("--lr", tr.lr)->capture_default_str();
    t->add_option("--seed", tr.seed, "init, shuffle and split seed")->capture_default_str();
    t->add_option("--filters", tr.filters, "encoder filters per stage, e.g. 16,32,64")
        ->delimiter(',');
    t->add_option("--units", tr.units, "LSTM units per direction")->capture_default_str();
    t->add_option("--fusion", tr.fusion, "fusion conv filters")->capture_default_str();
    t->add_option("--lambda1", tr.lambda1)->capture_default_str();
    t->add_option("--lambda2", tr.lambda2)->capture_default_str();

    UnwrapOptions un;
    std::size_t index = 0;
    auto *u = app.add_subcommand("unwrap", "unwrap one image");
    u->add_option("--input", un.input, "raw little-endian float32 wrapped phase");
    u->add_option("--height", un.height);
    u->add_option("--width", un.width);
    u->add_option("--dataset", un.dataset, "read the image from a dataset instead");
    auto *index_opt = u->add_option("--index", index, "dataset image index");
    u->add_option("--method", un.method, "model or qgpu")->capture_default_str();
    u->add_option("--checkpoint", un.checkpoint);
    u->add_option("--out", un.out, "raw float32 output")->required();
    u->add_option("--pgm", un.pgm, "optional 16-bit PGM export");

    CompareOptions cmp;
    std::uint64_t split_seed = 0;
    auto *c = app.add_subcommand("compare", "evaluate methods; writes report.json/.txt, sweep.csv");
    c->add_option("--data", cmp.data, "dataset directory")->required();
    c->add_option("--methods", cmp.methods, "identity,qgpu,truth,model:CKPT")->delimiter(',');
    c->add_option("--split", cmp.split, "test or all")->capture_default_str();
    auto *seed_opt = c->add_option("--split-seed", split_seed,
                                   "split seed (default: taken from the first model)");
    c->add_option("--out", cmp.out, "report directory")->required();
    c->add_option("--threads", cmp.threads, "worker threads (0 = auto)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUserError;
    }

    return run_guarded(
        [&] {
            if (*g) {
                cmd_gen(gen, std::cout);
            } else if (*t) {
                cmd_train(tr, std::cout);
            } else if (*u) {
                if (*index_opt) {
                    un.index = index;
                }
                cmd_unwrap(un, std::cout);
            } else if (*c) {
                if (*seed_opt) {
                    cmp.split_seed = split_seed;
                }
                cmd_compare(cmp, std::cout);
            }
        },
        std::cerr);
}
