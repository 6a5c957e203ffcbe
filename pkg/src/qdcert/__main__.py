from qdcert.cli import main

raise SystemExit(main())
