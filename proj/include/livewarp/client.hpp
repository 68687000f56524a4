// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <chrono>
#include <string>
#include <variant>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include "livewarp/protocol.hpp"

namespace livewarp {

/// Blocking single-threaded client for the render service protocol.
class ProtocolClient {
    using tcp = boost::asio::ip::tcp;

public:
    using Message = std::variant<nlohmann::json, protocol::FrameMessage>;

    /// `receive_buffer` > 0 shrinks the socket receive buffer, so a client
    /// that stops reading stalls the server quickly.
    ProtocolClient(const std::string& host, unsigned short port, int receive_buffer = 0)
        : ws_(ioc_) {
        tcp::resolver resolver(ioc_);
        const auto endpoints = resolver.resolve(host, std::to_string(port));
        auto& sock = boost::beast::get_lowest_layer(ws_);
        sock.open(endpoints.begin()->endpoint().protocol());
        if (receive_buffer > 0) sock.set_option(boost::asio::socket_base::receive_buffer_size(receive_buffer));
        sock.connect(endpoints.begin()->endpoint());
        ws_.read_message_max(std::size_t(1) << 28);
        ws_.handshake(host + ":" + std::to_string(port), "/");
    }

    ~ProtocolClient() {
        boost::system::error_code ec;
        if (ws_.is_open()) ws_.close(boost::beast::websocket::close_code::normal, ec);
    }

    void send(const nlohmann::json& msg) {
        ws_.text(true);
        ws_.write(boost::asio::buffer(msg.dump()));
    }

    void send_raw_text(const std::string& text) {
        ws_.text(true);
        ws_.write(boost::asio::buffer(text));
    }

    Message read() {
        boost::beast::flat_buffer buf;
        ws_.read(buf);
        const auto data = buf.cdata();
        if (ws_.got_text()) return nlohmann::json::parse(boost::beast::buffers_to_string(data));
        const auto* p = static_cast<const std::uint8_t*>(data.data());
        return protocol::FrameMessage::decode(std::span(p, data.size()));
    }

    /// Reads until a JSON reply arrives; frames seen on the way are counted.
    nlohmann::json read_reply(std::size_t* frames_skipped = nullptr) {
        for (;;) {
            Message m = read();
            if (auto* j = std::get_if<nlohmann::json>(&m)) return *j;
            if (frames_skipped) ++*frames_skipped;
        }
    }

    protocol::FrameMessage read_frame() {
        for (;;) {
            Message m = read();
            if (auto* f = std::get_if<protocol::FrameMessage>(&m)) return std::move(*f);
        }
    }

    nlohmann::json request(const nlohmann::json& msg) {
        send(msg);
        return read_reply();
    }

    void close() {
        ws_.close(boost::beast::websocket::close_code::normal);
    }

    /// Closes the TCP connection without a closing handshake.
    void drop() {
        boost::system::error_code ec;
        boost::beast::get_lowest_layer(ws_).close(ec);
    }

private:
    boost::asio::io_context ioc_;
    boost::beast::websocket::stream<tcp::socket> ws_;
};

}  // namespace livewarp
