#include "cnl/crypto/seal.hpp"

#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/rand.h>
#include <openssl/rsa.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace cnl::crypto {

namespace {

constexpr std::uint8_t kMagic[4] = {'C', 'N', 'S', '1'};
constexpr std::size_t kSessionKey = 32;
constexpr std::size_t kNonce = 12;
constexpr std::size_t kTag = 16;

struct CtxFree {
  void operator()(EVP_PKEY_CTX* c) const { EVP_PKEY_CTX_free(c); }
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
  void operator()(BIO* b) const { BIO_free(b); }
};

std::string bio_string(BIO* bio) {
  char* data = nullptr;
  const long len = BIO_get_mem_data(bio, &data);
  return std::string(data, static_cast<std::size_t>(len));
}

std::shared_ptr<EVP_PKEY> read_public(const std::string& pem) {
  std::unique_ptr<BIO, CtxFree> bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
  EVP_PKEY* k = PEM_read_bio_PUBKEY(bio.get(), nullptr, nullptr, nullptr);
  if (k == nullptr) throw SealError("seal: invalid recipient public key");
  return std::shared_ptr<EVP_PKEY>(k, EVP_PKEY_free);
}

void set_oaep(EVP_PKEY_CTX* ctx) {
  if (EVP_PKEY_CTX_set_rsa_padding(ctx, RSA_PKCS1_OAEP_PADDING) <= 0 ||
      EVP_PKEY_CTX_set_rsa_oaep_md(ctx, EVP_sha256()) <= 0 ||
      EVP_PKEY_CTX_set_rsa_mgf1_md(ctx, EVP_sha256()) <= 0) {
    throw SealError("seal: cannot configure RSA-OAEP");
  }
}

}  // namespace

void IdentityKey::Free::operator()(EVP_PKEY* k) const { EVP_PKEY_free(k); }

IdentityKey IdentityKey::generate(int bits) {
  EVP_PKEY* k = EVP_RSA_gen(static_cast<unsigned>(bits));
  if (k == nullptr) throw SealError("identity: RSA key generation failed");
  IdentityKey id;
  id.key_ = std::shared_ptr<EVP_PKEY>(k, Free{});
  return id;
}

IdentityKey IdentityKey::from_private_pem(const std::string& pem) {
  std::unique_ptr<BIO, CtxFree> bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
  EVP_PKEY* k = PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr);
  if (k == nullptr) throw SealError("identity: invalid private key PEM");
  IdentityKey id;
  id.key_ = std::shared_ptr<EVP_PKEY>(k, Free{});
  return id;
}

IdentityKey IdentityKey::load_or_create(const std::string& path, int bits) {
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_private_pem(ss.str());
  }
  IdentityKey id = generate(bits);
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw SealError("identity: cannot write " + path);
  out << id.private_pem();
  std::filesystem::permissions(path, std::filesystem::perms::owner_read | std::filesystem::perms::owner_write);
  return id;
}

std::string IdentityKey::private_pem() const {
  std::unique_ptr<BIO, CtxFree> bio(BIO_new(BIO_s_mem()));
  if (PEM_write_bio_PrivateKey(bio.get(), key_.get(), nullptr, nullptr, 0, nullptr, nullptr) != 1) {
    throw SealError("identity: PEM export failed");
  }
  return bio_string(bio.get());
}

std::string IdentityKey::public_pem() const {
  std::unique_ptr<BIO, CtxFree> bio(BIO_new(BIO_s_mem()));
  if (PEM_write_bio_PUBKEY(bio.get(), key_.get()) != 1) throw SealError("identity: PEM export failed");
  return bio_string(bio.get());
}

// Layout: magic(4) | wrapped_len(2, BE) | wrapped key | nonce(12) | ciphertext | tag(16).
// The header up to the nonce is authenticated as associated data.
Bytes control_seal(const std::string& recipient_public_pem, const Bytes& payload) {
  auto pub = read_public(recipient_public_pem);
  std::uint8_t session[kSessionKey];
  std::uint8_t nonce[kNonce];
  if (RAND_bytes(session, kSessionKey) != 1 || RAND_bytes(nonce, kNonce) != 1) {
    throw SealError("seal: entropy failure");
  }

  std::unique_ptr<EVP_PKEY_CTX, CtxFree> pctx(EVP_PKEY_CTX_new(pub.get(), nullptr));
  if (!pctx || EVP_PKEY_encrypt_init(pctx.get()) <= 0) throw SealError("seal: RSA init failed");
  set_oaep(pctx.get());
  std::size_t wrapped_len = 0;
  if (EVP_PKEY_encrypt(pctx.get(), nullptr, &wrapped_len, session, kSessionKey) <= 0) {
    throw SealError("seal: RSA sizing failed");
  }
  Bytes wrapped(wrapped_len);
  if (EVP_PKEY_encrypt(pctx.get(), wrapped.data(), &wrapped_len, session, kSessionKey) <= 0) {
    throw SealError("seal: RSA encryption failed");
  }
  wrapped.resize(wrapped_len);

  Bytes out(kMagic, kMagic + 4);
  out.push_back(static_cast<std::uint8_t>(wrapped_len >> 8));
  out.push_back(static_cast<std::uint8_t>(wrapped_len & 0xff));
  out.insert(out.end(), wrapped.begin(), wrapped.end());
  const std::size_t aad_len = out.size();
  out.insert(out.end(), nonce, nonce + kNonce);

  std::unique_ptr<EVP_CIPHER_CTX, CtxFree> cctx(EVP_CIPHER_CTX_new());
  if (!cctx || EVP_EncryptInit_ex(cctx.get(), EVP_chacha20_poly1305(), nullptr, session, nonce) != 1) {
    throw SealError("seal: cipher init failed");
  }
  int len = 0;
  if (EVP_EncryptUpdate(cctx.get(), nullptr, &len, out.data(), static_cast<int>(aad_len)) != 1) {
    throw SealError("seal: AAD failed");
  }
  const std::size_t body = out.size();
  out.resize(body + payload.size() + kTag);
  if (!payload.empty() &&
      EVP_EncryptUpdate(cctx.get(), out.data() + body, &len, payload.data(), static_cast<int>(payload.size())) != 1) {
    throw SealError("seal: encryption failed");
  }
  int fin = 0;
  if (EVP_EncryptFinal_ex(cctx.get(), out.data() + body + payload.size(), &fin) != 1 ||
      EVP_CIPHER_CTX_ctrl(cctx.get(), EVP_CTRL_AEAD_GET_TAG, kTag, out.data() + body + payload.size()) != 1) {
    throw SealError("seal: finalization failed");
  }
  OPENSSL_cleanse(session, kSessionKey);
  return out;
}

Bytes control_open(const IdentityKey& key, const Bytes& sealed) {
  if (sealed.size() < 6 || std::memcmp(sealed.data(), kMagic, 4) != 0) throw SealError("open: bad header");
  const std::size_t wrapped_len = (std::size_t(sealed[4]) << 8) | sealed[5];
  const std::size_t aad_len = 6 + wrapped_len;
  if (sealed.size() < aad_len + kNonce + kTag) throw SealError("open: truncated blob");

  std::unique_ptr<EVP_PKEY_CTX, CtxFree> pctx(EVP_PKEY_CTX_new(key.handle(), nullptr));
  if (!pctx || EVP_PKEY_decrypt_init(pctx.get()) <= 0) throw SealError("open: RSA init failed");
  set_oaep(pctx.get());
  std::uint8_t session[512];
  std::size_t session_len = sizeof(session);
  if (EVP_PKEY_decrypt(pctx.get(), session, &session_len, sealed.data() + 6, wrapped_len) <= 0 ||
      session_len != kSessionKey) {
    throw SealError("open: session key rejected");
  }

  const std::uint8_t* nonce = sealed.data() + aad_len;
  const std::uint8_t* ct = nonce + kNonce;
  const std::size_t ct_len = sealed.size() - aad_len - kNonce - kTag;
  Bytes tag(ct + ct_len, ct + ct_len + kTag);

  std::unique_ptr<EVP_CIPHER_CTX, CtxFree> cctx(EVP_CIPHER_CTX_new());
  if (!cctx || EVP_DecryptInit_ex(cctx.get(), EVP_chacha20_poly1305(), nullptr, session, nonce) != 1) {
    throw SealError("open: cipher init failed");
  }
  OPENSSL_cleanse(session, sizeof(session));
  int len = 0;
  if (EVP_DecryptUpdate(cctx.get(), nullptr, &len, sealed.data(), static_cast<int>(aad_len)) != 1) {
    throw SealError("open: AAD failed");
  }
  Bytes out(ct_len);
  if (ct_len > 0 && EVP_DecryptUpdate(cctx.get(), out.data(), &len, ct, static_cast<int>(ct_len)) != 1) {
    throw SealError("open: decryption failed");
  }
  if (EVP_CIPHER_CTX_ctrl(cctx.get(), EVP_CTRL_AEAD_SET_TAG, kTag, tag.data()) != 1) {
    throw SealError("open: tag setup failed");
  }
  int fin = 0;
  std::uint8_t scratch[16];
  if (EVP_DecryptFinal_ex(cctx.get(), scratch, &fin) != 1) throw SealError("open: authentication failed");
  return out;
}

std::string base64_encode(const Bytes& data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                                static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw std::invalid_argument("base64: length not a multiple of 4");
  if (text.empty()) return {};
  Bytes out(text.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw std::invalid_argument("base64: malformed input");
  std::size_t pad = 0;
  if (text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

}  // namespace cnl::crypto
