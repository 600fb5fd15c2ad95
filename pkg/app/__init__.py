# groupcodes
