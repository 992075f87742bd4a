//! The same community protocol over real TCP sockets: two follower servers
//! on loopback, a leader dialing them, one block mined end to end.
//!
//! In a cluster each follower would be `bench run --config follower.conf`
//! on its own machine; here they are threads for a self-contained demo.

use std::net::{TcpListener, TcpStream};
use std::thread;

use txshard::analyzer::DepsMode;
use txshard::bench::{synthesize, SynthSpec};
use txshard::engine::SyntheticCost;
use txshard::pow::{check_pow, Difficulty};
use txshard::protocol::{serve, FollowerConfig, Leader};
use txshard::roles::{create_block, mine_block_community, LocalChain};
use txshard::types::Address;

fn main() {
    // Followers: accept one connection each and serve it until the leader
    // hangs up.
    let mut servers = Vec::new();
    let mut addrs = Vec::new();
    for follower_id in 0..2u32 {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        addrs.push(listener.local_addr().unwrap());
        servers.push(thread::spawn(move || {
            let (conn, peer) = listener.accept().unwrap();
            conn.set_nodelay(true).ok();
            println!("follower {follower_id} serving {peer}");
            serve(
                conn,
                FollowerConfig {
                    follower_id,
                    cost: SyntheticCost::ZERO,
                },
            )
        }));
    }

    let mut leader = Leader::new();
    for (i, addr) in addrs.iter().enumerate() {
        let stream = TcpStream::connect(addr).unwrap();
        stream.set_nodelay(true).ok();
        leader.add_follower(i as u32, stream).unwrap();
    }
    println!("leader connected to followers {:?}", leader.follower_ids());

    let workload = synthesize(&SynthSpec {
        txns_per_block: 50,
        block_count: 1,
        ..SynthSpec::default()
    });
    let chain = LocalChain::new(workload.genesis.clone());
    let target = Difficulty::pow2(244);
    let candidate = create_block(
        &workload.blocks[0],
        &[],
        &chain,
        Address::from_index(1),
        0,
    )
    .unwrap();

    let (sealed, post) = mine_block_community(
        candidate,
        &chain,
        &target,
        &mut leader,
        DepsMode::Full,
        true,
    )
    .unwrap();
    println!(
        "mined block {} over TCP: nonce {}, {} accounts in post-state, pow verifies: {}",
        sealed.number,
        sealed.nonce,
        post.non_default().count(),
        check_pow(&sealed, &target)
    );

    // Dropping the leader closes both sockets; followers exit cleanly.
    drop(leader);
    for server in servers {
        let result = server.join().unwrap();
        println!("follower exited: {result:?}");
    }
}
