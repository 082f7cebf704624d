//! The discrete-event core on its own: schedule, cancel, and drain by time.
//!
//! cargo run --example event_engine

use ftswitch::engine::Engine;

#[derive(Debug)]
enum Ev {
    Tick(u32),
    Timeout,
}

fn main() {
    let mut engine = Engine::new();
    engine.schedule(Ev::Tick(0), 0).unwrap();
    let timeout = engine.schedule(Ev::Timeout, 30).unwrap();
    // Same instant: insertion order breaks the tie.
    engine.schedule(Ev::Tick(100), 10).unwrap();

    engine.run_until_with(100, |engine, fired| {
        println!(
            "{:>3} ms  #{:<2} {:?}",
            fired.time, fired.seq, fired.payload
        );
        if let Ev::Tick(n) = fired.payload {
            if n < 3 {
                engine.schedule_in(Ev::Tick(n + 1), 10);
            }
            if n == 2 {
                println!("        cancel timeout: {}", engine.cancel(timeout));
            }
        }
    });
    println!("clock {} ms, {} pending", engine.now(), engine.pending());
}
