#include "dq/json_io.hpp"

#include <stdexcept>

namespace dq {

using nlohmann::json;

namespace {

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

void to_json(json& j, const ModelConfig& c) {
  j = json{{"dense_len", c.dense_len},
           {"id_vocab_sizes", c.id_vocab_sizes},
           {"dense_embed_dim", c.dense_embed_dim},
           {"id_embed_total_dim", c.id_embed_total_dim},
           {"duration_embed_dim", c.duration_embed_dim},
           {"projection_out_dim", c.projection_out_dim},
           {"mlp_dims", c.mlp_dims},
           {"output_head", c.output_head == OutputHead::kSigmoid ? "sigmoid" : "linear"},
           {"num_heads", c.num_heads},
           {"duration_tower", c.duration_tower},
           {"duration_mean", c.duration_mean},
           {"duration_scale", c.duration_scale},
           {"batch_size", c.batch_size},
           {"learning_rate", c.learning_rate},
           {"momentum", c.momentum},
           {"id_lr_scale", c.id_lr_scale},
           {"epochs", c.epochs},
           {"shuffle", c.shuffle},
           {"seed", c.seed}};
}

void from_json(const json& j, ModelConfig& c) {
  read_opt(j, "dense_len", c.dense_len);
  read_opt(j, "id_vocab_sizes", c.id_vocab_sizes);
  read_opt(j, "dense_embed_dim", c.dense_embed_dim);
  read_opt(j, "id_embed_total_dim", c.id_embed_total_dim);
  read_opt(j, "duration_embed_dim", c.duration_embed_dim);
  read_opt(j, "projection_out_dim", c.projection_out_dim);
  read_opt(j, "mlp_dims", c.mlp_dims);
  if (j.contains("output_head")) {
    const auto head = j.at("output_head").get<std::string>();
    if (head != "sigmoid" && head != "linear") throw std::invalid_argument("output_head must be sigmoid or linear");
    c.output_head = head == "sigmoid" ? OutputHead::kSigmoid : OutputHead::kLinear;
  }
  read_opt(j, "num_heads", c.num_heads);
  read_opt(j, "duration_tower", c.duration_tower);
  read_opt(j, "duration_mean", c.duration_mean);
  read_opt(j, "duration_scale", c.duration_scale);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "learning_rate", c.learning_rate);
  read_opt(j, "momentum", c.momentum);
  read_opt(j, "id_lr_scale", c.id_lr_scale);
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "shuffle", c.shuffle);
  read_opt(j, "seed", c.seed);
}

void to_json(json& j, const GenConfig& c) {
  j = json{{"n_users", c.n_users},
           {"n_videos", c.n_videos},
           {"latent_dim", c.latent_dim},
           {"d_min", c.d_min},
           {"d_max", c.d_max},
           {"interest_scale", c.interest_scale},
           {"interest_offset", c.interest_offset},
           {"noise_sd", c.noise_sd},
           {"exposure_bias", c.exposure_bias},
           {"exposure_interest", c.exposure_interest},
           {"slate_size", c.slate_size},
           {"seed", c.seed}};
}

void from_json(const json& j, GenConfig& c) {
  read_opt(j, "n_users", c.n_users);
  read_opt(j, "n_videos", c.n_videos);
  read_opt(j, "latent_dim", c.latent_dim);
  read_opt(j, "d_min", c.d_min);
  read_opt(j, "d_max", c.d_max);
  read_opt(j, "interest_scale", c.interest_scale);
  read_opt(j, "interest_offset", c.interest_offset);
  read_opt(j, "noise_sd", c.noise_sd);
  read_opt(j, "exposure_bias", c.exposure_bias);
  read_opt(j, "exposure_interest", c.exposure_interest);
  read_opt(j, "slate_size", c.slate_size);
  read_opt(j, "seed", c.seed);
}

void to_json(json& j, const Schema& s) {
  j = json{{"dense_len", s.dense_len},
           {"id_vocab_sizes", s.id_vocab_sizes},
           {"dense_names", s.dense_names},
           {"id_names", s.id_names}};
}

void from_json(const json& j, Schema& s) {
  j.at("dense_len").get_to(s.dense_len);
  j.at("id_vocab_sizes").get_to(s.id_vocab_sizes);
  read_opt(j, "dense_names", s.dense_names);
  read_opt(j, "id_names", s.id_names);
}

void to_json(json& j, const DurationGroups& g) { j = json{{"m", g.m}, {"boundaries", g.boundaries}}; }

void from_json(const json& j, DurationGroups& g) {
  j.at("m").get_to(g.m);
  j.at("boundaries").get_to(g.boundaries);
  if (g.m < 1 || g.boundaries.size() != g.m - 1) {
    throw std::invalid_argument("duration groups: boundaries must have m-1 entries");
  }
}

}  // namespace dq
